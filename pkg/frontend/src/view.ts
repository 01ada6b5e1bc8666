// DOM rendering: a plain function of the model.  All interactivity is
// delegated through data-* attributes picked up by main.ts, so this file
// stays free of state.

import type { UiModel } from "./model.js";
import type { ContextNode } from "./types.js";
import { groupPreview } from "./measures.js";

const KIND_ICONS: Record<string, string> = {
  FILE: "\u{1F4C4}",
  MAIL: "\u{2709}",
  BOOKMARK: "\u{1F517}",
  EVENT: "\u{1F4C5}",
  CONTACT: "\u{1F464}",
  NOTE: "\u{1F4DD}",
};

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

function badge(buoyancy: number): string {
  const pct = Math.round(buoyancy * 100);
  return `<span class="badge" title="buoyancy ${buoyancy.toFixed(3)}">${pct}%</span>`;
}

function renderContext(node: ContextNode, selected: string | null): string {
  const classes = ["ctx"];
  if (node.current) classes.push("current");
  if (node.id === selected) classes.push("selected");
  const children = node.children.map((c) => renderContext(c, selected)).join("");
  return `
    <li>
      <span class="${classes.join(" ")}" data-ctx="${node.id}">
        ${esc(node.name)} <small>${node.state.toLowerCase()}</small>
        ${badge(node.buoyancy)} <small>${node.member_count}</small>
        <button class="mini" data-merge-src="${node.id}" ${node.current ? "disabled title=\"current context cannot be merged away\"" : ""}>merge…</button>
      </span>
      ${children ? `<ul>${children}</ul>` : ""}
    </li>`;
}

export function render(root: HTMLElement, model: UiModel): void {
  const items = model.items
    .map(
      (i) => `
      <tr>
        <td>${KIND_ICONS[i.kind] ?? "\u{2022}"} ${esc(i.name)}</td>
        <td>${i.strength.toFixed(2)}</td>
        <td><span class="chip chip-${i.measure.toLowerCase()}">${i.measure}</span></td>
        <td><button class="mini" data-pin-item="${i.id}">${i.pinned ? "\u{1F4CC}" : "pin"}</button></td>
        <td><button class="mini" data-remove-item="${i.id}">\u{2715}</button></td>
      </tr>`,
    )
    .join("");

  const proposals = model.proposals
    .map(
      (p) => `
      <li>
        <code>${esc(p.item)}</code> → <code>${esc(p.ctx)}</code>
        (${p.rule.toLowerCase()}, ${p.strength})
        <button class="mini" data-accept="${p.id}">accept</button>
        <button class="mini" data-reject="${p.id}">reject</button>
      </li>`,
    )
    .join("");

  let preview = "";
  if (model.preview) {
    const grouped = groupPreview(model.preview);
    preview = grouped.order
      .map((measure) => {
        const rows = (grouped.groups.get(measure) ?? [])
          .map((a) => `<li><code>${esc(a.item ?? a.ctx)}</code> <small>${esc(a.reason)}</small></li>`)
          .join("");
        return `<h4>${measure}</h4><ul>${rows}</ul>`;
      })
      .join("");
    preview = `<section class="preview"><h3>forgetting preview</h3>${preview}
      <button data-run-tidyup>run tidy-up</button></section>`;
  }

  root.innerHTML = `
    <header>
      <h1>contextdesk</h1>
      <form data-create-form>
        <input name="name" placeholder="new context" required />
        <button>create</button>
      </form>
      <button data-preview-tidyup>preview tidy-up</button>
      ${model.toast ? `<div class="toast">${esc(model.toast)}</div>` : ""}
    </header>
    <main>
      <nav><ul>${model.tree.map((n) => renderContext(n, model.selected)).join("")}</ul></nav>
      <section>
        <table class="items">
          <thead><tr><th>item</th><th>strength</th><th>measure</th><th></th><th></th></tr></thead>
          <tbody>${items}</tbody>
        </table>
        <form data-upload-form>
          <input name="name" placeholder="note name" required />
          <input name="text" placeholder="text" />
          <button>add note</button>
        </form>
      </section>
      <aside>
        <h3>proposals</h3>
        <ul>${proposals || "<li><small>inbox empty</small></li>"}</ul>
        ${preview}
      </aside>
    </main>`;
}
