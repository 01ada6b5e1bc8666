// User actions map onto API requests; no mutation originates in the UI
// without one.  Errors come back as ApiError codes for inline display
// (e.g. SRC_IS_CURRENT disables merging away the current context).

import { ApiClient, ApiError } from "./api.js";

export interface DispatchResult {
  ok: boolean;
  errorCode?: string;
  message?: string;
}

export class Dispatcher {
  constructor(private readonly api: ApiClient) {}

  private async guard(action: () => Promise<unknown>): Promise<DispatchResult> {
    try {
      await action();
      return { ok: true };
    } catch (err) {
      if (err instanceof ApiError) {
        return { ok: false, errorCode: err.code, message: err.message };
      }
      return { ok: false, errorCode: "NETWORK", message: String(err) };
    }
  }

  clickContext(ctx: string): Promise<DispatchResult> {
    return this.guard(() => this.api.switchTo(ctx));
  }

  createContext(name: string, parent?: string | null): Promise<DispatchResult> {
    return this.guard(() => this.api.createContext(name, parent));
  }

  mergeInto(src: string, dst: string): Promise<DispatchResult> {
    return this.guard(() => this.api.mergeInto(src, dst));
  }

  split(
    ctx: string,
    nameA: string,
    nameB: string,
    assignment: Record<string, "A" | "B">,
  ): Promise<DispatchResult> {
    return this.guard(() => this.api.split(ctx, nameA, nameB, assignment));
  }

  dragItem(item: string, from: string, to: string): Promise<DispatchResult> {
    // remove+add keeps the graph the owner of the move semantics
    return this.guard(async () => {
      await this.api.addItem(to, item);
      await this.api.removeItem(from, item);
    });
  }

  uploadNote(ctx: string, name: string, text: string): Promise<DispatchResult> {
    return this.guard(() => this.api.uploadItem(ctx, name, text));
  }

  removeItem(ctx: string, item: string): Promise<DispatchResult> {
    return this.guard(() => this.api.removeItem(ctx, item));
  }

  togglePin(ctx: string, item: string): Promise<DispatchResult> {
    return this.guard(() => this.api.togglePin(ctx, item));
  }

  acceptProposal(id: string): Promise<DispatchResult> {
    return this.guard(() => this.api.acceptProposal(id));
  }

  rejectProposal(id: string): Promise<DispatchResult> {
    return this.guard(() => this.api.rejectProposal(id));
  }

  runTidyup(): Promise<DispatchResult> {
    return this.guard(() => this.api.runTidyup());
  }
}
