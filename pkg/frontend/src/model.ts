// The sidebar's model: derivable purely from API responses plus the event
// stream, no locally invented state.  applyEvent is a pure transition; when
// an event cannot carry enough data (member lists, recomputed buoyancy), it
// names the refetch effect instead of guessing, so the model always ends up
// equal to a cold rebuild of the same endpoints.

import type {
  ApiEvent,
  ContextNode,
  ContextTree,
  Item,
  Proposal,
  ReorgReport,
} from "./types.js";

export type Effect = "refetch-all" | "fetch-contexts" | "fetch-items" | "fetch-proposals";

export interface UiModel {
  tree: ContextNode[];
  current: string | null;
  selected: string | null;
  items: Item[];
  proposals: Proposal[];
  preview: ReorgReport | null;
  lastSeq: number;
  toast: string | null;
}

export function emptyModel(): UiModel {
  return {
    tree: [],
    current: null,
    selected: null,
    items: [],
    proposals: [],
    preview: null,
    lastSeq: 0,
    toast: null,
  };
}

export function buildModel(
  tree: ContextTree,
  items: Item[],
  proposals: Proposal[],
  selected: string | null,
  lastSeq: number,
): UiModel {
  return {
    tree: tree.contexts,
    current: tree.current,
    selected,
    items,
    proposals,
    preview: null,
    lastSeq,
    toast: null,
  };
}

export interface Transition {
  model: UiModel;
  effects: Effect[];
}

function mapTree(nodes: ContextNode[], fn: (n: ContextNode) => ContextNode): ContextNode[] {
  return nodes.map((n) => fn({ ...n, children: mapTree(n.children, fn) }));
}

function findNode(nodes: ContextNode[], id: string): ContextNode | null {
  for (const node of nodes) {
    if (node.id === id) return node;
    const hit = findNode(node.children, id);
    if (hit) return hit;
  }
  return null;
}

function removeNode(nodes: ContextNode[], id: string): [ContextNode[], ContextNode | null] {
  let removed: ContextNode | null = null;
  const out: ContextNode[] = [];
  for (const node of nodes) {
    if (node.id === id) {
      removed = node;
      continue;
    }
    const [children, hit] = removeNode(node.children, id);
    if (hit) removed = hit;
    out.push({ ...node, children });
  }
  return [out, removed];
}

export function applyEvent(model: UiModel, event: ApiEvent): Transition {
  if (event.seq !== model.lastSeq + 1) {
    // SEQ_GAP: trust nothing, rebuild from the endpoints exactly once
    return { model: { ...model, lastSeq: event.seq }, effects: ["refetch-all"] };
  }
  const next: UiModel = { ...model, lastSeq: event.seq };
  const p = event.payload as Record<string, never>;

  switch (event.type) {
    case "CONTEXT_SWITCHED": {
      const newCtx = p["new"] as unknown as string;
      next.current = newCtx;
      next.selected = newCtx;
      next.tree = mapTree(next.tree, (n) => ({ ...n, current: n.id === newCtx }));
      return { model: next, effects: ["fetch-items", "fetch-contexts"] };
    }
    case "CONTEXT_CREATED": {
      const node: ContextNode = {
        id: p["ctx"] as unknown as string,
        name: p["name"] as unknown as string,
        state: "ACTIVE",
        buoyancy: 1.0,
        current: false,
        member_count: 0,
        children: [],
      };
      const parent = p["parent"] as unknown as string | null;
      if (parent) {
        next.tree = mapTree(next.tree, (n) =>
          n.id === parent ? { ...n, children: [...n.children, node] } : n,
        );
      } else {
        next.tree = [...next.tree, node];
      }
      return { model: next, effects: [] };
    }
    case "CONTEXT_MERGED": {
      const src = p["src"] as unknown as string;
      const dst = p["dst"] as unknown as string | null;
      const [pruned, removed] = removeNode(next.tree, src);
      next.tree = pruned;
      if (removed && dst) {
        // children of the merged context re-home under the destination
        next.tree = mapTree(next.tree, (n) =>
          n.id === dst ? { ...n, children: [...n.children, ...removed.children] } : n,
        );
      }
      if (next.selected === src) next.selected = dst;
      const effects: Effect[] = ["fetch-contexts"];
      if (next.selected === dst) effects.push("fetch-items");
      return { model: next, effects };
    }
    case "CONTEXT_SPLIT": {
      return { model: next, effects: ["fetch-contexts", "fetch-items"] };
    }
    case "ITEM_ADDED": {
      const ctx = p["ctx"] as unknown as string;
      next.tree = mapTree(next.tree, (n) =>
        n.id === ctx ? { ...n, member_count: n.member_count + 1 } : n,
      );
      if (ctx === next.selected) {
        const item: Item = {
          id: p["item"] as unknown as string,
          name: (p["name"] as unknown as string) ?? "",
          kind: (p["kind"] as unknown as string) ?? "FILE",
          strength: (p["strength"] as unknown as number) ?? 1.0,
          origin: (p["origin"] as unknown as string) ?? "USER",
          measure: "KEEP",
          pinned: false,
          buoyancy: (p["strength"] as unknown as number) ?? 1.0,
          last_access_at: "",
        };
        const rest = next.items.filter((i) => i.id !== item.id);
        next.items = [...rest, item].sort((a, b) => (a.id < b.id ? -1 : 1));
        next.proposals = next.proposals.filter(
          (pr) => !(pr.item === item.id && pr.ctx === ctx),
        );
        return { model: next, effects: ["fetch-items"] };
      }
      return { model: next, effects: [] };
    }
    case "ITEM_REMOVED": {
      const ctx = p["ctx"] as unknown as string;
      const item = p["item"] as unknown as string;
      next.tree = mapTree(next.tree, (n) =>
        n.id === ctx ? { ...n, member_count: Math.max(0, n.member_count - 1) } : n,
      );
      if (ctx === next.selected) {
        next.items = next.items.filter((i) => i.id !== item);
      }
      return { model: next, effects: [] };
    }
    case "MEASURE_CHANGED": {
      const ctx = p["ctx"] as unknown as string;
      const item = p["item"] as unknown as string;
      if (ctx === next.selected) {
        next.items = next.items.map((i) =>
          i.id === item
            ? {
                ...i,
                measure: (p["new"] as unknown as string) ?? (p["measure"] as unknown as string) ?? i.measure,
                pinned: (p["pinned"] as unknown as boolean) ?? i.pinned,
              }
            : i,
        );
      }
      return { model: next, effects: [] };
    }
    case "TIDYUP_REPORT": {
      const report = p["report"] as unknown as ReorgReport;
      next.toast = `tidy-up: ${report.actions.length} actions`;
      next.preview = null;
      return { model: next, effects: ["fetch-contexts", "fetch-items"] };
    }
    case "PROPOSAL_ADDED": {
      const proposal = event.payload as unknown as Proposal;
      if (proposal.status === "PENDING") {
        next.proposals = [...next.proposals.filter((x) => x.id !== proposal.id), proposal];
      }
      return { model: next, effects: [] };
    }
    default:
      return { model: next, effects: [] };
  }
}

export function selectedNode(model: UiModel): ContextNode | null {
  return model.selected ? findNode(model.tree, model.selected) : null;
}
