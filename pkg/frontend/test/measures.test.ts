import { describe, expect, it } from "vitest";

import { bucketize, groupPreview } from "../src/measures.js";
import type { Policy, ReorgReport } from "../src/types.js";

const DEFAULTS: Policy = {
  half_life_days: 30,
  hide_threshold: 0.5,
  condense_threshold: 0.2,
  archive_threshold: 0.1,
  delete_threshold: 0.05,
  allow_delete: false,
  min_retention_days: 365,
  keep_top_k: 5,
};

describe("buoyancy badges", () => {
  it("mirrors the server's measure bands", () => {
    expect(bucketize(1.0, DEFAULTS, false)).toBe("KEEP");
    expect(bucketize(0.5, DEFAULTS, false)).toBe("KEEP");
    expect(bucketize(0.3, DEFAULTS, false)).toBe("HIDE");
    expect(bucketize(0.15, DEFAULTS, false)).toBe("CONDENSE");
    expect(bucketize(0.07, DEFAULTS, false)).toBe("ARCHIVE");
    expect(bucketize(0.01, DEFAULTS, false)).toBe("ARCHIVE"); // delete disallowed
    expect(bucketize(0.01, { ...DEFAULTS, allow_delete: true }, false)).toBe("DELETE");
  });

  it("pinned is always KEEP", () => {
    expect(bucketize(0.0, DEFAULTS, true)).toBe("KEEP");
  });
});

describe("forgetting preview grouping", () => {
  it("groups the consulting-style dry-run report by target measure", () => {
    const report: ReorgReport = {
      now: "2026-08-08T09:10:00+00:00",
      actions: [
        { kind: "measure", ctx: "c-m1", item: "train-schedule-1.txt", old: "KEEP", new: "ARCHIVE", reason: "mb=0.002953" },
        { kind: "measure", ctx: "c-m1", item: "slides-1.ppt", old: "KEEP", new: "ARCHIVE", reason: "mb=0.009842" },
        { kind: "measure", ctx: "c-m2", item: "notes.md", old: "KEEP", new: "HIDE", reason: "mb=0.35" },
        { kind: "merge", ctx: "c-m1", item: null, old: "ACTIVE", new: "c-xy", reason: "stale sub-context" },
      ],
    };
    const { order, groups } = groupPreview(report);
    expect(order).toEqual(["HIDE", "ARCHIVE", "MERGE"]);
    expect(groups.get("ARCHIVE")?.map((a) => a.item)).toEqual([
      "slides-1.ppt",
      "train-schedule-1.txt",
    ]);
    expect(groups.get("HIDE")?.map((a) => a.item)).toEqual(["notes.md"]);
    expect(groups.get("MERGE")?.[0].ctx).toBe("c-m1");
  });

  it("grouping is exactly the report's actions, nothing added or dropped", () => {
    const report: ReorgReport = {
      now: "t",
      actions: [
        { kind: "measure", ctx: "c", item: "a", old: "KEEP", new: "ARCHIVE", reason: "" },
        { kind: "measure", ctx: "c", item: "b", old: "HIDE", new: "ARCHIVE", reason: "" },
      ],
    };
    const { groups } = groupPreview(report);
    const total = [...groups.values()].reduce((n, bucket) => n + bucket.length, 0);
    expect(total).toBe(report.actions.length);
  });
});
