// Buoyancy badges: bucketize the continuous score into the five measure
// bands so the escalation ladder is directly visible, and group dry-run
// reports by their target measure for the forgetting preview.

import type { Policy, ReorgAction, ReorgReport } from "./types.js";

export const MEASURE_ORDER = ["KEEP", "HIDE", "CONDENSE", "ARCHIVE", "DELETE"] as const;
export type MeasureName = (typeof MEASURE_ORDER)[number];

export function bucketize(mb: number, policy: Policy, pinned: boolean): MeasureName {
  if (pinned) return "KEEP";
  if (mb >= policy.hide_threshold) return "KEEP";
  if (mb >= policy.condense_threshold) return "HIDE";
  if (mb >= policy.archive_threshold) return "CONDENSE";
  if (mb >= policy.delete_threshold) return "ARCHIVE";
  return policy.allow_delete ? "DELETE" : "ARCHIVE";
}

export interface PreviewGroups {
  order: string[];
  groups: Map<string, ReorgAction[]>;
}

export function groupPreview(report: ReorgReport): PreviewGroups {
  const groups = new Map<string, ReorgAction[]>();
  for (const action of report.actions) {
    const key = action.kind === "merge" ? "MERGE" : action.new;
    const bucket = groups.get(key) ?? [];
    bucket.push(action);
    groups.set(key, bucket);
  }
  for (const bucket of groups.values()) {
    bucket.sort((a, b) =>
      a.ctx === b.ctx ? ((a.item ?? "") < (b.item ?? "") ? -1 : 1) : a.ctx < b.ctx ? -1 : 1,
    );
  }
  const order = [...MEASURE_ORDER.filter((m) => groups.has(m)), ...[...groups.keys()].filter(
    (k) => !(MEASURE_ORDER as readonly string[]).includes(k),
  ).sort()];
  return { order, groups };
}
