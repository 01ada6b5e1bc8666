// Bootstrap: wire the model loop (single event-application queue), the
// event stream, and delegated DOM handlers together.

import { ApiClient } from "./api.js";
import { Dispatcher } from "./dispatch.js";
import { applyEffects } from "./effects.js";
import { applyEvent, buildModel, emptyModel, type UiModel } from "./model.js";
import { EventStream, connectEventSource } from "./sse.js";
import type { ApiEvent } from "./types.js";
import { render } from "./view.js";

const EVENT_TYPES = [
  "CONTEXT_SWITCHED",
  "CONTEXT_CREATED",
  "CONTEXT_MERGED",
  "CONTEXT_SPLIT",
  "ITEM_ADDED",
  "ITEM_REMOVED",
  "MEASURE_CHANGED",
  "TIDYUP_REPORT",
  "PROPOSAL_ADDED",
];

class Sidebar {
  model: UiModel = emptyModel();
  private readonly api = new ApiClient((url, init) => fetch(url, init));
  private readonly dispatcher = new Dispatcher(this.api);
  private queue: Promise<void> = Promise.resolve();

  constructor(private readonly root: HTMLElement) {}

  async start(): Promise<void> {
    await this.refetchAll();
    const stream = new EventStream((event) => this.enqueue(event));
    connectEventSource(stream, "", EVENT_TYPES);
    this.bindHandlers();
  }

  private enqueue(event: ApiEvent): void {
    this.queue = this.queue.then(() => this.step(event));
  }

  private async step(event: ApiEvent): Promise<void> {
    const { model, effects } = applyEvent(this.model, event);
    this.model = await applyEffects(model, effects, this.api);
    this.draw();
  }

  private async refetchAll(): Promise<void> {
    const tree = await this.api.contexts();
    const selected = this.model.selected ?? tree.current;
    const items = selected ? (await this.api.items(selected)).items : [];
    const proposals = (await this.api.proposals()).proposals;
    this.model = buildModel(tree, items, proposals, selected, this.model.lastSeq);
    this.draw();
  }

  private draw(): void {
    render(this.root, this.model);
  }

  private bindHandlers(): void {
    this.root.addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      const ctxEl = target.closest("[data-ctx]") as HTMLElement | null;
      if (target.dataset.mergeSrc) {
        const dst = prompt("merge into which context id?");
        if (dst) void this.dispatcher.mergeInto(target.dataset.mergeSrc, dst);
        ev.stopPropagation();
        return;
      }
      if (target.dataset.pinItem && this.model.selected) {
        void this.dispatcher.togglePin(this.model.selected, target.dataset.pinItem);
        return;
      }
      if (target.dataset.removeItem && this.model.selected) {
        void this.dispatcher.removeItem(this.model.selected, target.dataset.removeItem);
        return;
      }
      if (target.dataset.accept) {
        void this.dispatcher.acceptProposal(target.dataset.accept).then(() => {
          this.model = {
            ...this.model,
            proposals: this.model.proposals.filter((p) => p.id !== target.dataset.accept),
          };
          this.draw();
        });
        return;
      }
      if (target.dataset.reject) {
        void this.dispatcher.rejectProposal(target.dataset.reject).then(() => {
          this.model = {
            ...this.model,
            proposals: this.model.proposals.filter((p) => p.id !== target.dataset.reject),
          };
          this.draw();
        });
        return;
      }
      if (target.dataset.runTidyup !== undefined) {
        void this.dispatcher.runTidyup();
        return;
      }
      if (target.dataset.previewTidyup !== undefined) {
        void this.api.previewTidyup().then((report) => {
          this.model = { ...this.model, preview: report };
          this.draw();
        });
        return;
      }
      if (ctxEl?.dataset.ctx) {
        void this.dispatcher.clickContext(ctxEl.dataset.ctx);
      }
    });

    this.root.addEventListener("submit", (ev) => {
      const form = ev.target as HTMLFormElement;
      ev.preventDefault();
      const data = new FormData(form);
      if (form.dataset.createForm !== undefined) {
        void this.dispatcher.createContext(String(data.get("name")), this.model.selected);
        form.reset();
      } else if (form.dataset.uploadForm !== undefined && this.model.selected) {
        void this.dispatcher.uploadNote(
          this.model.selected,
          String(data.get("name")),
          String(data.get("text") ?? ""),
        );
        form.reset();
      }
    });
  }
}

const mount = document.getElementById("sidebar");
if (mount) {
  void new Sidebar(mount).start();
}

export { Sidebar };
