// Event-stream plumbing: parses SSE frames into ApiEvents and tracks the
// last seen id for reconnects.  The transport is injected (EventSource in
// the browser, a scripted emitter in tests).

import type { ApiEvent } from "./types.js";

export interface StreamMessage {
  id?: string;
  type: string;
  data: string;
}

export type StreamHandler = (event: ApiEvent) => void;

export class EventStream {
  lastEventId = 0;

  constructor(private readonly onEvent: StreamHandler) {}

  handleMessage(message: StreamMessage): void {
    let parsed: ApiEvent;
    try {
      parsed = JSON.parse(message.data) as ApiEvent;
    } catch {
      return; // heartbeats and comments never reach here, but stay safe
    }
    if (typeof parsed.seq !== "number" || !parsed.type) return;
    this.lastEventId = parsed.seq;
    this.onEvent(parsed);
  }

  reconnectUrl(base: string): string {
    return this.lastEventId > 0
      ? `${base}/api/events?last_event_id=${this.lastEventId}`
      : `${base}/api/events`;
  }
}

export function connectEventSource(
  stream: EventStream,
  base: string,
  eventTypes: string[],
): EventSource {
  const source = new EventSource(stream.reconnectUrl(base));
  for (const type of eventTypes) {
    source.addEventListener(type, (ev) => {
      const msg = ev as MessageEvent<string>;
      stream.handleMessage({ id: msg.lastEventId, type, data: msg.data });
    });
  }
  return source;
}
