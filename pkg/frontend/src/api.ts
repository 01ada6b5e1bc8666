// Thin client over the desk service's JSON routes.  The fetch function is
// injected so tests can run against a scripted fake.

import type { ContextTree, Item, Policy, Proposal, ReorgReport } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
    private readonly auth: { user: string; password: string } = { user: "desk", password: "desk" },
  ) {}

  private headers(): Record<string, string> {
    const token = btoa(`${this.auth.user}:${this.auth.password}`);
    return { Authorization: `Basic ${token}`, "Content-Type": "application/json" };
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.base + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await response.json()) as T & { error?: string; message?: string };
    if (!response.ok) {
      throw new ApiError(response.status, doc.error ?? "ERROR", doc.message ?? "");
    }
    return doc;
  }

  contexts(): Promise<ContextTree> {
    return this.request("GET", "/api/contexts");
  }

  items(ctx: string): Promise<{ items: Item[] }> {
    return this.request("GET", `/api/contexts/${ctx}/items`);
  }

  proposals(): Promise<{ proposals: Proposal[] }> {
    return this.request("GET", "/api/proposals");
  }

  policy(): Promise<Policy> {
    return this.request("GET", "/api/policy");
  }

  createContext(name: string, parent?: string | null): Promise<{ id: string }> {
    return this.request("POST", "/api/contexts", parent ? { name, parent } : { name });
  }

  switchTo(ctx: string): Promise<unknown> {
    return this.request("POST", `/api/contexts/${ctx}/current`);
  }

  mergeInto(src: string, dst: string): Promise<unknown> {
    return this.request("POST", `/api/contexts/${src}/merge-into/${dst}`);
  }

  split(
    ctx: string,
    nameA: string,
    nameB: string,
    assignment: Record<string, "A" | "B">,
  ): Promise<unknown> {
    return this.request("POST", `/api/contexts/${ctx}/split`, {
      name_a: nameA,
      name_b: nameB,
      assignment,
    });
  }

  addItem(ctx: string, itemId: string): Promise<unknown> {
    return this.request("POST", `/api/contexts/${ctx}/items`, { item_id: itemId });
  }

  uploadItem(ctx: string, name: string, text: string, pinned = false): Promise<unknown> {
    return this.request("POST", `/api/contexts/${ctx}/items`, {
      upload: { name, kind: "NOTE", text },
      pinned,
    });
  }

  removeItem(ctx: string, item: string): Promise<unknown> {
    return this.request("DELETE", `/api/contexts/${ctx}/items/${item}`);
  }

  togglePin(ctx: string, item: string): Promise<unknown> {
    return this.request("POST", `/api/contexts/${ctx}/pin/${item}`, {});
  }

  acceptProposal(id: string): Promise<unknown> {
    return this.request("POST", `/api/proposals/${id}/accept`);
  }

  rejectProposal(id: string): Promise<unknown> {
    return this.request("POST", `/api/proposals/${id}/reject`);
  }

  previewTidyup(): Promise<ReorgReport> {
    return this.request("GET", "/api/forgetting/preview");
  }

  runTidyup(): Promise<ReorgReport> {
    return this.request("POST", "/api/tidyup", {});
  }
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message || code);
  }
}
