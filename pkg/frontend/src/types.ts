// Wire types mirroring the desk service's JSON API.

export interface ContextNode {
  id: string;
  name: string;
  state: string;
  buoyancy: number;
  current: boolean;
  member_count: number;
  children: ContextNode[];
}

export interface ContextTree {
  contexts: ContextNode[];
  current: string | null;
}

export interface Item {
  id: string;
  name: string;
  kind: string;
  strength: number;
  origin: string;
  measure: string;
  pinned: boolean;
  buoyancy: number;
  last_access_at: string;
}

export interface Proposal {
  id: string;
  item: string;
  ctx: string;
  strength: number;
  rule: string;
  status: string;
}

export interface ReorgAction {
  kind: string;
  ctx: string;
  item: string | null;
  old: string;
  new: string;
  reason: string;
}

export interface ReorgReport {
  now: string;
  actions: ReorgAction[];
}

export interface Policy {
  half_life_days: number;
  hide_threshold: number;
  condense_threshold: number;
  archive_threshold: number;
  delete_threshold: number;
  allow_delete: boolean;
  min_retention_days: number;
  keep_top_k: number;
}

export type ApiEventType =
  | "CONTEXT_SWITCHED"
  | "CONTEXT_CREATED"
  | "CONTEXT_MERGED"
  | "CONTEXT_SPLIT"
  | "ITEM_ADDED"
  | "ITEM_REMOVED"
  | "MEASURE_CHANGED"
  | "TIDYUP_REPORT"
  | "PROPOSAL_ADDED";

export interface ApiEvent {
  seq: number;
  type: ApiEventType;
  payload: Record<string, unknown>;
}
