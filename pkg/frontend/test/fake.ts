// A scripted desk-service fake: holds the same state shape the real API
// serves, answers the read endpoints, and records every request so tests
// can assert that no mutation bypasses the API.

import { ApiClient, type FetchLike } from "../src/api.js";
import type { ContextNode, Item, Proposal } from "../src/types.js";

export interface FakeState {
  contexts: ContextNode[];
  current: string | null;
  itemsByCtx: Record<string, Item[]>;
  proposals: Proposal[];
}

export function makeItem(id: string, name: string, overrides: Partial<Item> = {}): Item {
  return {
    id,
    name,
    kind: "FILE",
    strength: 1.0,
    origin: "USER",
    measure: "KEEP",
    pinned: false,
    buoyancy: 1.0,
    last_access_at: "2026-01-05T09:00:00+00:00",
    ...overrides,
  };
}

export function makeCtx(id: string, name: string, overrides: Partial<ContextNode> = {}): ContextNode {
  return {
    id,
    name,
    state: "ACTIVE",
    buoyancy: 1.0,
    current: false,
    member_count: 0,
    children: [],
    ...overrides,
  };
}

export class FakeServer {
  requests: { method: string; path: string; body?: unknown }[] = [];

  constructor(public state: FakeState) {}

  get api(): ApiClient {
    return new ApiClient(this.fetch, "");
  }

  private respond(status: number, doc: unknown): Response {
    return new Response(JSON.stringify(doc), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.requests.push({ method, path, body });

    if (method === "GET" && path === "/api/contexts") {
      return this.respond(200, { contexts: this.state.contexts, current: this.state.current });
    }
    const itemsMatch = path.match(/^\/api\/contexts\/([^/]+)\/items$/);
    if (method === "GET" && itemsMatch) {
      return this.respond(200, { items: this.state.itemsByCtx[itemsMatch[1]] ?? [] });
    }
    if (method === "GET" && path === "/api/proposals") {
      return this.respond(200, { proposals: this.state.proposals });
    }
    if (method === "POST" && /\/current$/.test(path)) {
      return this.respond(200, { old: this.state.current, new: path.split("/")[3] });
    }
    if (method === "POST" || method === "DELETE") {
      return this.respond(200, { ok: true });
    }
    return this.respond(404, { error: "NO_ROUTE" });
  };
}
