// Effect resolution shared by the live sidebar and the tests: each effect
// is one cold read of an endpoint folded back into the model.

import type { ApiClient } from "./api.js";
import { buildModel, type Effect, type UiModel } from "./model.js";

export async function applyEffects(
  model: UiModel,
  effects: Effect[],
  api: ApiClient,
): Promise<UiModel> {
  let next = model;
  for (const effect of new Set(effects)) {
    if (effect === "refetch-all") {
      const tree = await api.contexts();
      const selected = next.selected ?? tree.current;
      const items = selected ? (await api.items(selected)).items : [];
      const proposals = (await api.proposals()).proposals;
      next = buildModel(tree, items, proposals, selected, next.lastSeq);
    } else if (effect === "fetch-contexts") {
      const tree = await api.contexts();
      next = { ...next, tree: tree.contexts, current: tree.current };
    } else if (effect === "fetch-items" && next.selected) {
      const { items } = await api.items(next.selected);
      next = { ...next, items };
    } else if (effect === "fetch-proposals") {
      const { proposals } = await api.proposals();
      next = { ...next, proposals };
    }
  }
  return next;
}
