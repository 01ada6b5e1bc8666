"""The assembled desk service.

One object owns the graph, the context layer, inference, forgetting,
views, and the event broadcast; facades and the API talk only to it.
All mutations serialize through a single re-entrant lock (single-writer,
multi-reader), and every mutating operation emits exactly one domain
event to the stream.
"""

from __future__ import annotations

import collections
import json
import queue
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .clock import Clock, iso
from .content import ArchiveStore, ContentStore, NullArchiveStore
from .contexts import ContextManager, CtxState, Membership, Origin
from .errors import DeskError, UnknownIdError
from .forgetting import ForgettingEngine, ForgettingPolicy, ReorgReport
from .graph import (
    DurableStore,
    EventLog,
    GraphStore,
    ITEM_KINDS,
    NodeKind,
    SNAPSHOT_INTERVAL_DEFAULT,
    recover,
)
from .inference import (
    AccessAction,
    AccessEvent,
    ApplyMode,
    InferenceEngine,
    Proposal,
    parse_mail,
)
from .views import ViewCache, ViewKind, on_context_switch


@dataclass
class Config:
    http_port: int = 8686
    imap_port: int = 1143
    user: str = "desk"
    password: str = "desk"
    policy: ForgettingPolicy = field(default_factory=ForgettingPolicy)
    reply_mode: ApplyMode = ApplyMode.AUTO
    coaccess_mode: ApplyMode = ApplyMode.SUGGEST

    @classmethod
    def load(cls, path: Path | str) -> "Config":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        policy = ForgettingPolicy.from_dict(doc.get("policy", {}))
        return cls(
            http_port=int(doc.get("http_port", 8686)),
            imap_port=int(doc.get("imap_port", 1143)),
            user=str(doc.get("user", "desk")),
            password=str(doc.get("password", "desk")),
            policy=policy,
            reply_mode=ApplyMode(doc.get("reply_mode", "AUTO")),
            coaccess_mode=ApplyMode(doc.get("coaccess_mode", "SUGGEST")),
        )


class EventBroadcaster:
    """Ordered fan-out of domain events to SSE subscribers.

    Events get a dense stream seq (the SSE id); a reconnect with
    Last-Event-ID replays from the ring buffer, which holds the last
    10,000 events.  Slow subscribers are dropped once their backlog
    hits 1,000 events.
    """

    RING_SIZE = 10_000
    SUBSCRIBER_BACKLOG = 1_000

    def __init__(self):
        self.ring: collections.deque[dict] = collections.deque(maxlen=self.RING_SIZE)
        self.seq = 0
        self._lock = threading.Lock()
        self._subscribers: list[queue.Queue] = []

    def publish(self, event_type: str, payload: dict) -> int:
        with self._lock:
            self.seq += 1
            event = {"seq": self.seq, "type": event_type, "payload": payload}
            self.ring.append(event)
            delivered = 0
            for sub in list(self._subscribers):
                try:
                    sub.put_nowait(event)
                    delivered += 1
                except queue.Full:
                    self._subscribers.remove(sub)  # drop the laggard
            return delivered

    def subscribe(self, last_event_id: int | None = None) -> "queue.Queue[dict]":
        sub: "queue.Queue[dict]" = queue.Queue(maxsize=self.SUBSCRIBER_BACKLOG)
        with self._lock:
            if last_event_id is not None:
                for event in self.ring:
                    if event["seq"] > last_event_id:
                        sub.put_nowait(event)
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)


class DeskService:
    """Facade-facing surface; every method takes or derives a timestamp."""

    def __init__(
        self,
        root: Path | str | None = None,
        config: Config | None = None,
        clock: Clock | None = None,
        snapshot_interval: int | None = SNAPSHOT_INTERVAL_DEFAULT,
    ):
        self.config = config or Config()
        self.clock = clock or Clock()
        self.lock = threading.RLock()
        self.root = Path(root) if root else None
        if self.root:
            self.durable: DurableStore | None = DurableStore(self.root / "store", snapshot_interval)
            self.graph: GraphStore = self.durable.store
            self.content = ContentStore(self.root / "content")
            self.archive = ArchiveStore(self.root / "archive", self.root / "archive.index")
        else:
            self.durable = None
            self.graph = GraphStore()
            tmp = Path(tempfile.mkdtemp(prefix="contextdesk-"))
            self.content = ContentStore(tmp / "content")
            self.archive = ArchiveStore(tmp / "archive", tmp / "archive.index")
        self.contexts = ContextManager(self.graph)
        self.inference = InferenceEngine(self.graph, self.contexts,
                                         self.config.reply_mode, self.config.coaccess_mode)
        self.forgetting = ForgettingEngine(
            self.graph, self.contexts, self.config.policy, self.content, self.archive
        )
        self.views = ViewCache(self.graph, self.contexts)
        self.events = EventBroadcaster()
        self.access_log: list[AccessEvent] = []

    # -- helpers -----------------------------------------------------------

    def _now(self, now: datetime | None) -> datetime:
        return now or self.clock.now()

    def close(self) -> None:
        if self.durable is not None:
            self.durable.close()

    # -- context operations --------------------------------------------------

    def create_context(self, name: str, parent: str | None = None, now: datetime | None = None) -> str:
        now = self._now(now)
        with self.lock:
            ctx_id = self.contexts.create_context(name, parent, now)
            self.events.publish(
                "CONTEXT_CREATED",
                {"ctx": ctx_id, "name": name, "parent": parent, "graph_seq": self.graph.seq},
            )
            return ctx_id

    def set_current(self, ctx_id: str, now: datetime | None = None) -> dict:
        now = self._now(now)
        with self.lock:
            old, new = self.contexts.set_current(ctx_id, now)
            self.access_log.append(AccessEvent(ctx=ctx_id, ts=now, action=AccessAction.SWITCH_IN))
            deltas = on_context_switch(self.graph, self.contexts, old, new, now, self.views)
            payload = {
                "old": old,
                "new": new,
                "deltas": {kind.value: delta.to_dict() for kind, delta in deltas.items()},
                "graph_seq": self.graph.seq,
            }
            self.events.publish("CONTEXT_SWITCHED", payload)
            return payload

    def create_item(
        self,
        kind: NodeKind,
        name: str,
        attrs: dict | None = None,
        content: bytes | None = None,
        now: datetime | None = None,
    ) -> str:
        now = self._now(now)
        with self.lock:
            node_attrs = {"name": name, "created_at": iso(now)}
            if attrs:
                node_attrs.update(attrs)
            if content is not None:
                node_attrs["content_ref"] = self.content.put(content)
                node_attrs["size"] = len(content)
            return self.graph.add_node(kind, node_attrs, now).id

    def add_item(
        self,
        ctx_id: str,
        item_id: str,
        strength: float = 1.0,
        origin: Origin = Origin.USER,
        pinned: bool = False,
        now: datetime | None = None,
    ) -> Membership:
        now = self._now(now)
        with self.lock:
            m = self.contexts.add_item(ctx_id, item_id, strength, origin, now, pinned)
            item = self.graph.node(item_id)
            self.events.publish(
                "ITEM_ADDED",
                {
                    "ctx": ctx_id,
                    "item": item_id,
                    "name": item.attrs.get("name"),
                    "kind": item.kind.value,
                    "strength": m.strength,
                    "origin": m.origin.value,
                    "graph_seq": self.graph.seq,
                },
            )
            return m

    def remove_item(self, ctx_id: str, item_id: str, now: datetime | None = None) -> bool:
        now = self._now(now)
        with self.lock:
            removed = self.contexts.remove_item(ctx_id, item_id, now)
            if removed:
                self.events.publish(
                    "ITEM_REMOVED", {"ctx": ctx_id, "item": item_id, "graph_seq": self.graph.seq}
                )
            return removed

    def pin_item(self, ctx_id: str, item_id: str, pinned: bool | None = None, now: datetime | None = None) -> Membership:
        """Toggle (or set) the pinned flag; pinning restores archived content."""
        now = self._now(now)
        with self.lock:
            existing = self.contexts.membership(ctx_id, item_id)
            if existing is None:
                raise UnknownIdError(f"{item_id} not in {ctx_id}")
            target = (not existing.pinned) if pinned is None else pinned
            if target:
                self.forgetting.restore_if_archived(ctx_id, item_id, now)
            m = self.contexts.set_pinned(ctx_id, item_id, target, now)
            self.events.publish(
                "MEASURE_CHANGED",
                {"ctx": ctx_id, "item": item_id, "measure": m.measure, "pinned": m.pinned,
                 "graph_seq": self.graph.seq},
            )
            return m

    def merge_contexts(self, src: str, dst: str, now: datetime | None = None) -> dict:
        now = self._now(now)
        with self.lock:
            report = self.contexts.merge_contexts(src, dst, now)
            self.events.publish(
                "CONTEXT_MERGED",
                {"src": src, "dst": dst, "moved": report.moved_items, "graph_seq": self.graph.seq},
            )
            return report.to_dict()

    def split_context(self, ctx_id: str, name_a: str, name_b: str, assignment: dict,
                      now: datetime | None = None) -> dict:
        now = self._now(now)
        with self.lock:
            ctx_a, ctx_b = self.contexts.split_context(ctx_id, name_a, name_b, assignment, now)
            self.events.publish(
                "CONTEXT_SPLIT",
                {"ctx": ctx_id, "a": ctx_a, "b": ctx_b, "graph_seq": self.graph.seq},
            )
            return {"ctx": ctx_id, "a": ctx_a, "b": ctx_b}

    def retract_context(self, ctx_id: str, now: datetime | None = None) -> dict:
        now = self._now(now)
        with self.lock:
            report = self.contexts.retract_context(ctx_id, now)
            self.events.publish(
                "CONTEXT_MERGED",
                {"src": ctx_id, "dst": self.contexts.parent_of(ctx_id), "retracted": True,
                 "graph_seq": self.graph.seq},
            )
            return report.to_dict()

    # -- items & access ---------------------------------------------------------

    def touch(self, item_id: str, ctx_id: str, now: datetime | None = None) -> Membership:
        now = self._now(now)
        with self.lock:
            return self.inference.touch(item_id, ctx_id, now, self.access_log)

    def record_open(self, item_id: str, now: datetime | None = None) -> None:
        """Note a facade read against the current context (co-access evidence)."""
        now = self._now(now)
        current = self.contexts.current_context()
        if current is not None:
            self.access_log.append(AccessEvent(ctx=current, ts=now, action=AccessAction.OPEN, item=item_id))

    def ingest_mail(self, raw: bytes, ctx_id: str | None = None, now: datetime | None = None) -> str:
        """Store a raw RFC 5322 message as a MAIL item and run reply inference."""
        now = self._now(now)
        with self.lock:
            header = parse_mail(raw)
            existing = self.inference.mail_by_message_id(header.message_id) if header.message_id else None
            if existing is not None:
                mail_id = existing
            else:
                attrs = {
                    "name": header.subject or header.message_id or "mail",
                    "subject": header.subject,
                    "message_id": header.message_id,
                    "sender": header.sender,
                    "recipients": header.recipients,
                }
                if header.in_reply_to:
                    attrs["in_reply_to"] = header.in_reply_to
                if header.references:
                    attrs["references"] = " ".join(header.references)
                if header.date:
                    attrs["date"] = iso(header.date)
                mail_id = self.create_item(NodeKind.MAIL, attrs["name"], attrs, content=raw, now=now)
            if ctx_id is not None:
                self.add_item(ctx_id, mail_id, 1.0, Origin.PROTOCOL, now=now)
            proposals = self.inference.infer_reply_context(mail_id, now)
            for proposal in proposals:
                self.events.publish("PROPOSAL_ADDED", {**proposal.to_dict(), "graph_seq": self.graph.seq})
            return mail_id

    def run_coaccess(self, window_minutes: float = 60.0, min_count: int = 3) -> list[Proposal]:
        with self.lock:
            proposals = self.inference.infer_coaccess(self.access_log, window_minutes, min_count)
            if self.inference.coaccess_mode == ApplyMode.AUTO and proposals:
                self.inference.apply_proposals(proposals, ApplyMode.AUTO, self.clock.now())
            for proposal in proposals:
                self.events.publish("PROPOSAL_ADDED", {**proposal.to_dict(), "graph_seq": self.graph.seq})
            return proposals

    def accept_proposal(self, proposal_id: str, now: datetime | None = None) -> Proposal:
        now = self._now(now)
        with self.lock:
            proposal = self.inference.proposals.get(proposal_id)
            if proposal is None:
                raise UnknownIdError(f"no such proposal: {proposal_id}")
            self.inference.apply_proposals([proposal], ApplyMode.AUTO, now)
            return proposal

    def reject_proposal(self, proposal_id: str) -> Proposal:
        with self.lock:
            proposal = self.inference.proposals.get(proposal_id)
            if proposal is None:
                raise UnknownIdError(f"no such proposal: {proposal_id}")
            self.inference.reject(proposal_id)
            return proposal

    # -- forgetting -----------------------------------------------------------

    def tidy_up(self, now: datetime | None = None) -> ReorgReport:
        now = self._now(now)
        with self.lock:
            report = self.forgetting.tidy_up(now, self.config.policy)
            for action in report.actions:
                if action.kind in ("measure", "delete"):
                    self.events.publish(
                        "MEASURE_CHANGED",
                        {"ctx": action.ctx, "item": action.item, "old": action.old,
                         "new": action.new, "graph_seq": self.graph.seq},
                    )
            self.events.publish(
                "TIDYUP_REPORT",
                {"report": report.to_dict(), "graph_seq": self.graph.seq},
            )
            return report

    def preview_tidy_up(self, now: datetime | None = None) -> ReorgReport:
        """Dry run: same algorithm against a throwaway clone, no state change."""
        now = self._now(now)
        with self.lock:
            clone = recover(self.graph.snapshot(), [])
            clone_cm = ContextManager(clone)
            engine = ForgettingEngine(clone, clone_cm, self.config.policy,
                                      content=None, archive=NullArchiveStore())
            return engine.tidy_up(now, self.config.policy)

    # -- reads ------------------------------------------------------------------

    def materialize(self, ctx_id: str, kind: ViewKind, include_hidden: bool = False,
                    now: datetime | None = None):
        now = self._now(now)
        with self.lock:
            return self.views.get(ctx_id, kind, now, include_hidden)

    def context_tree(self, now: datetime | None = None) -> dict:
        """Sidebar tree: every live context with state, buoyancy, current flag."""
        now = self._now(now)
        with self.lock:
            def describe(ctx_id: str) -> dict:
                node = self.contexts.context(ctx_id)
                children = [
                    describe(child)
                    for child in self.contexts.children_of(ctx_id)
                    if self.contexts.state(child) != CtxState.RETRACTED
                ]
                return {
                    "id": ctx_id,
                    "name": node.attrs.get("name"),
                    "state": node.attrs.get("state", "ACTIVE"),
                    "buoyancy": round(self.forgetting.context_buoyancy(ctx_id, now), 6),
                    "current": ctx_id == self.contexts.current_context(),
                    "member_count": len(self.contexts.memberships_of(ctx_id)),
                    "children": children,
                }

            return {
                "contexts": [describe(r) for r in self.contexts.roots()],
                "current": self.contexts.current_context(),
            }

    def context_items(self, ctx_id: str, now: datetime | None = None) -> list[dict]:
        from .forgetting import memory_buoyancy

        now = self._now(now)
        with self.lock:
            out = []
            for m in self.contexts.memberships_of(ctx_id):
                item = self.graph.node(m.item)
                try:
                    mb = memory_buoyancy(m, now, self.config.policy)
                except DeskError:
                    mb = m.strength
                out.append(
                    {
                        "id": m.item,
                        "name": item.attrs.get("name"),
                        "kind": item.kind.value,
                        "strength": m.strength,
                        "origin": m.origin.value,
                        "measure": m.measure,
                        "pinned": m.pinned,
                        "buoyancy": round(mb, 6),
                        "last_access_at": iso(m.last_access_at),
                    }
                )
            return out

    def item_content(self, item_id: str) -> bytes:
        item = self.graph.node(item_id)
        ref = item.attrs.get("content_ref")
        if not ref:
            return b""
        if self.content.has(str(ref)):
            return self.content.get(str(ref))
        if self.archive.has(str(ref)):
            raise UnknownIdError(f"content of {item_id} is archived")
        return b""

    def snapshot_now(self) -> Path | None:
        with self.lock:
            if self.durable is not None:
                return self.durable.write_snapshot()
            return None

    def event_log_length(self) -> int:
        return len(self.graph.log)
