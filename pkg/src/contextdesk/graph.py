"""Typed property graph with an append-only event log and snapshots.

All state changes in the system flow through :meth:`GraphStore.apply` as one
of six mutation ops.  Every applied mutation yields an :class:`EventRecord`
whose payload alone suffices to replay it, which gives us crash recovery
(snapshot + log tail) and the replay-equivalence property the test suite
leans on.

Wire formats (compatibility contract):
  * event log -- one JSON object per line:
    ``{"seq": int, "ts": RFC3339, "op": str, "payload": {...}}``
  * snapshot -- one JSON document:
    ``{"seq": int, "nodes": [...], "edges": [...]}``
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .clock import iso
from .errors import CorruptRecord, GapInLog, InvariantViolation, UnknownIdError

Scalar = str | int | float | bool


class NodeKind(str, Enum):
    FILE = "FILE"
    MAIL = "MAIL"
    BOOKMARK = "BOOKMARK"
    EVENT = "EVENT"
    CONTACT = "CONTACT"
    NOTE = "NOTE"
    CONTEXT = "CONTEXT"
    STUB = "STUB"


# Kinds that count as user-facing information items (contexts and
# condensation stubs are bookkeeping).
ITEM_KINDS = frozenset(
    {NodeKind.FILE, NodeKind.MAIL, NodeKind.BOOKMARK, NodeKind.EVENT,
     NodeKind.CONTACT, NodeKind.NOTE}
)


class EdgeLabel(str, Enum):
    containsItem = "containsItem"
    hasSubContext = "hasSubContext"
    isRelatedTo = "isRelatedTo"
    isPartOf = "isPartOf"
    inReplyTo = "inReplyTo"
    mergedInto = "mergedInto"
    splitInto = "splitInto"
    condensedInto = "condensedInto"


@dataclass
class Node:
    id: str
    kind: NodeKind
    attrs: dict[str, Scalar] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind.value, "attrs": dict(self.attrs)}


@dataclass
class Edge:
    id: str
    src: str
    label: EdgeLabel
    dst: str
    attrs: dict[str, Scalar] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "src": self.src,
            "label": self.label.value,
            "dst": self.dst,
            "attrs": dict(self.attrs),
        }


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: str
    op: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "op": self.op, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        try:
            doc = json.loads(line)
            return cls(seq=int(doc["seq"]), ts=doc["ts"], op=doc["op"], payload=doc["payload"])
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(f"unparseable event record: {exc}") from exc


MUTATION_OPS = (
    "add-node",
    "set-node-attrs",
    "remove-node",
    "add-edge",
    "set-edge-attrs",
    "remove-edge",
)


class IdGenerator:
    """Timestamp-prefixed, lexicographically sortable ids.

    ``<16-digit microseconds>-<8-digit allocation counter>``: sortable as
    plain strings, unique within one store, deterministic under a virtual
    clock (no randomness).
    """

    def __init__(self, counter: int = 0):
        self.counter = counter

    def next(self, now: datetime) -> str:
        self.counter += 1
        micros = max(0, int(now.timestamp() * 1_000_000))
        return f"{micros:016d}-{self.counter:08d}"

    @staticmethod
    def counter_of(node_id: str) -> int:
        try:
            return int(node_id.rsplit("-", 1)[1])
        except (IndexError, ValueError):
            return 0


def _check_attrs(attrs: dict) -> dict[str, Scalar]:
    for key, value in attrs.items():
        if not isinstance(key, str) or not key:
            raise InvariantViolation(f"attr key must be a nonempty string, got {key!r}")
        if not isinstance(value, (str, int, float, bool)):
            raise InvariantViolation(f"attr {key!r} must be scalar, got {type(value).__name__}")
    return dict(attrs)


class GraphStore:
    """In-memory graph state plus the event appender.

    Not thread safe on its own; the service serializes all writers
    through one lock (single-writer, multi-reader).
    """

    def __init__(self, log_sink: "EventLog | None" = None):
        self.nodes: dict[str, Node] = {}
        self.edges: dict[str, Edge] = {}
        self.seq = 0
        self.version = 0  # bumped per mutation; view caches key on it
        self.ids = IdGenerator()
        self.log = log_sink if log_sink is not None else EventLog()
        self.commit_hooks: list = []  # called with each committed EventRecord
        # adjacency: node id -> label value -> set of edge ids
        self._out: dict[str, dict[str, set[str]]] = {}
        self._in: dict[str, dict[str, set[str]]] = {}

    # -- id helpers ---------------------------------------------------

    def new_id(self, now: datetime) -> str:
        return self.ids.next(now)

    # -- lookups ------------------------------------------------------

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownIdError(f"no such node: {node_id}") from None

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownIdError(f"no such edge: {edge_id}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self.nodes

    def out_edges(self, node_id: str, label: EdgeLabel | None = None) -> list[Edge]:
        by_label = self._out.get(node_id, {})
        if label is not None:
            ids = by_label.get(label.value, ())
        else:
            ids = (e for s in by_label.values() for e in s)
        return [self.edges[e] for e in ids]

    def in_edges(self, node_id: str, label: EdgeLabel | None = None) -> list[Edge]:
        by_label = self._in.get(node_id, {})
        if label is not None:
            ids = by_label.get(label.value, ())
        else:
            ids = (e for s in by_label.values() for e in s)
        return [self.edges[e] for e in ids]

    def edges_between(self, src: str, label: EdgeLabel, dst: str) -> list[Edge]:
        out = self._out.get(src, {}).get(label.value, ())
        return [self.edges[e] for e in out if self.edges[e].dst == dst]

    def neighbors(
        self,
        node_id: str,
        label: EdgeLabel | None = None,
        direction: str = "out",
    ) -> list[str]:
        """All nodes connected via matching edges, sorted by id, no dupes."""
        if node_id not in self.nodes:
            raise UnknownIdError(f"no such node: {node_id}")
        if direction not in ("out", "in", "any"):
            raise InvariantViolation(f"bad direction: {direction}")
        found: set[str] = set()
        if direction in ("out", "any"):
            found.update(e.dst for e in self.out_edges(node_id, label))
        if direction in ("in", "any"):
            found.update(e.src for e in self.in_edges(node_id, label))
        return sorted(found)

    def nodes_of_kind(self, kind: NodeKind) -> list[Node]:
        return [n for n in self.nodes.values() if n.kind == kind]

    # -- mutation entry point ------------------------------------------

    def apply(self, op: str, payload: dict, now: datetime) -> EventRecord:
        """Validate and apply one mutation; append its event record."""
        self._apply_state(op, payload)
        self.seq += 1
        self.version += 1
        record = EventRecord(seq=self.seq, ts=iso(now), op=op, payload=payload)
        self.log.append(record)
        for hook in self.commit_hooks:
            hook(record)
        return record

    def replay(self, record: EventRecord) -> None:
        """Re-apply a logged record during recovery."""
        if record.seq != self.seq + 1:
            raise GapInLog(f"expected seq {self.seq + 1}, got {record.seq}")
        self._apply_state(record.op, record.payload)
        self.seq = record.seq
        self.version += 1

    def _apply_state(self, op: str, payload: dict) -> None:
        if op == "add-node":
            node_id = payload["id"]
            if node_id in self.nodes:
                raise InvariantViolation(f"duplicate node id {node_id}")
            kind = NodeKind(payload["kind"])
            self.nodes[node_id] = Node(node_id, kind, _check_attrs(payload.get("attrs", {})))
        elif op == "set-node-attrs":
            node = self.node(payload["id"])
            node.attrs.update(_check_attrs(payload.get("set", {})))
            for key in payload.get("unset", []):
                node.attrs.pop(key, None)
        elif op == "remove-node":
            node = self.node(payload["id"])
            # cascade: no dangling edges at any commit point
            for edge in list(self.out_edges(node.id)) + list(self.in_edges(node.id)):
                if edge.id in self.edges:
                    self._drop_edge(edge)
            del self.nodes[node.id]
            self._out.pop(node.id, None)
            self._in.pop(node.id, None)
        elif op == "add-edge":
            edge_id = payload["id"]
            if edge_id in self.edges:
                raise InvariantViolation(f"duplicate edge id {edge_id}")
            src, dst = payload["src"], payload["dst"]
            if src not in self.nodes:
                raise UnknownIdError(f"edge src missing: {src}")
            if dst not in self.nodes:
                raise UnknownIdError(f"edge dst missing: {dst}")
            label = EdgeLabel(payload["label"])
            edge = Edge(edge_id, src, label, dst, _check_attrs(payload.get("attrs", {})))
            self.edges[edge_id] = edge
            self._out.setdefault(src, {}).setdefault(label.value, set()).add(edge_id)
            self._in.setdefault(dst, {}).setdefault(label.value, set()).add(edge_id)
        elif op == "set-edge-attrs":
            edge = self.edge(payload["id"])
            edge.attrs.update(_check_attrs(payload.get("set", {})))
            for key in payload.get("unset", []):
                edge.attrs.pop(key, None)
        elif op == "remove-edge":
            self._drop_edge(self.edge(payload["id"]))
        else:
            raise InvariantViolation(f"unknown mutation op: {op}")

    def _drop_edge(self, edge: Edge) -> None:
        del self.edges[edge.id]
        self._out.get(edge.src, {}).get(edge.label.value, set()).discard(edge.id)
        self._in.get(edge.dst, {}).get(edge.label.value, set()).discard(edge.id)

    # -- convenience wrappers (generate ids, build payloads) -----------

    def add_node(self, kind: NodeKind, attrs: dict, now: datetime) -> Node:
        node_id = self.new_id(now)
        self.apply("add-node", {"id": node_id, "kind": kind.value, "attrs": attrs}, now)
        return self.nodes[node_id]

    def add_edge(self, src: str, label: EdgeLabel, dst: str, attrs: dict, now: datetime) -> Edge:
        edge_id = self.new_id(now)
        self.apply(
            "add-edge",
            {"id": edge_id, "src": src, "label": label.value, "dst": dst, "attrs": attrs},
            now,
        )
        return self.edges[edge_id]

    def set_node_attrs(self, node_id: str, set_attrs: dict, now: datetime, unset: list | None = None) -> None:
        payload: dict = {"id": node_id, "set": set_attrs}
        if unset:
            payload["unset"] = list(unset)
        self.apply("set-node-attrs", payload, now)

    def set_edge_attrs(self, edge_id: str, set_attrs: dict, now: datetime, unset: list | None = None) -> None:
        payload: dict = {"id": edge_id, "set": set_attrs}
        if unset:
            payload["unset"] = list(unset)
        self.apply("set-edge-attrs", payload, now)

    def remove_edge(self, edge_id: str, now: datetime) -> None:
        self.apply("remove-edge", {"id": edge_id}, now)

    def remove_node(self, node_id: str, now: datetime) -> None:
        self.apply("remove-node", {"id": node_id}, now)

    # -- snapshots ------------------------------------------------------

    def snapshot(self) -> dict:
        """Full-state document; canonical ordering so re-snapshots are byte-identical."""
        return {
            "seq": self.seq,
            "nodes": [self.nodes[i].to_dict() for i in sorted(self.nodes)],
            "edges": [self.edges[i].to_dict() for i in sorted(self.edges)],
        }

    def same_state(self, other: "GraphStore") -> bool:
        """Equality on (node set, edge set, attrs); ignores seq/log."""
        mine = {i: n.to_dict() for i, n in self.nodes.items()}
        theirs = {i: n.to_dict() for i, n in other.nodes.items()}
        if mine != theirs:
            return False
        return {i: e.to_dict() for i, e in self.edges.items()} == {
            i: e.to_dict() for i, e in other.edges.items()
        }


def recover(snapshot: dict | None, records: Iterable[EventRecord], log_sink: "EventLog | None" = None) -> GraphStore:
    """Rebuild a store from a snapshot plus a contiguous log tail.

    ``records`` must continue the snapshot's high-water seq with no gaps;
    a jump raises GAP_IN_LOG, an unparseable line CORRUPT_RECORD.
    """
    store = GraphStore(log_sink=log_sink if log_sink is not None else _NullLog())
    max_counter = 0
    if snapshot:
        store.seq = int(snapshot.get("seq", 0))
        for doc in snapshot.get("nodes", []):
            node = Node(doc["id"], NodeKind(doc["kind"]), dict(doc.get("attrs", {})))
            store.nodes[node.id] = node
            max_counter = max(max_counter, IdGenerator.counter_of(node.id))
        for doc in snapshot.get("edges", []):
            edge = Edge(doc["id"], doc["src"], EdgeLabel(doc["label"]), doc["dst"], dict(doc.get("attrs", {})))
            store.edges[edge.id] = edge
            store._out.setdefault(edge.src, {}).setdefault(edge.label.value, set()).add(edge.id)
            store._in.setdefault(edge.dst, {}).setdefault(edge.label.value, set()).add(edge.id)
            max_counter = max(max_counter, IdGenerator.counter_of(edge.id))
        for edge in store.edges.values():
            if edge.src not in store.nodes or edge.dst not in store.nodes:
                raise CorruptRecord(f"snapshot has dangling edge {edge.id}")
    for record in records:
        store.replay(record)
        for key in ("id",):
            if key in record.payload:
                max_counter = max(max_counter, IdGenerator.counter_of(record.payload[key]))
    store.ids.counter = max(store.ids.counter, max_counter)
    return store


class EventLog:
    """Append-only event log; in-memory by default, file-backed when given a path."""

    def __init__(self, path: Path | str | None = None):
        self.path = Path(path) if path else None
        self.records: list[EventRecord] = []
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: EventRecord) -> None:
        if self._fh is not None:
            self._fh.write(record.to_json() + "\n")
            self._fh.flush()
        else:
            self.records.append(record)

    def __len__(self) -> int:
        if self.path and self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                return sum(1 for line in fh if line.strip())
        return len(self.records)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @staticmethod
    def read_records(path: Path | str) -> Iterator[EventRecord]:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield EventRecord.from_json(line)


class _NullLog(EventLog):
    """Swallows appends; used for replay targets and dry-run clones."""

    def append(self, record: EventRecord) -> None:  # noqa: ARG002
        pass


SNAPSHOT_INTERVAL_DEFAULT = 10_000


class DurableStore:
    """GraphStore bound to a directory: events.log + snapshot.json.

    Snapshots are written every ``snapshot_interval`` events and on clean
    shutdown.  Writing a snapshot seals the active log into a
    ``events-<seq>.log`` segment and starts a fresh ``events.log``, so
    recovery reads the snapshot plus one short tail regardless of store
    age; sealed segments keep the full history.  Bulk ingests may pass
    ``snapshot_interval=None`` to defer snapshotting to close() --
    writing a full snapshot every 10k events is quadratic during imports.
    """

    def __init__(self, root: Path | str, snapshot_interval: int | None = SNAPSHOT_INTERVAL_DEFAULT):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.snapshot_interval = snapshot_interval
        self.log_path = self.root / "events.log"
        self.snapshot_path = self.root / "snapshot.json"
        self._events_since_snapshot = 0
        self.store = self._load()
        self.store.commit_hooks.append(self._after_commit)

    def _load(self) -> GraphStore:
        snapshot = None
        if self.snapshot_path.exists():
            with open(self.snapshot_path, "r", encoding="utf-8") as fh:
                snapshot = json.load(fh)
        base_seq = int(snapshot["seq"]) if snapshot else 0
        records = []
        if self.log_path.exists():
            for record in EventLog.read_records(self.log_path):
                if record.seq > base_seq:
                    records.append(record)
        store = recover(snapshot, records)
        store.log = EventLog(self.log_path)
        return store

    # GraphStore surface used by the upper layers
    def __getattr__(self, name):
        return getattr(self.store, name)

    def _after_commit(self, record: EventRecord) -> None:  # noqa: ARG002
        self._events_since_snapshot += 1
        if self.snapshot_interval and self._events_since_snapshot >= self.snapshot_interval:
            self.write_snapshot()

    def write_snapshot(self) -> Path:
        doc = self.store.snapshot()
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        os.replace(tmp, self.snapshot_path)
        self._rotate_log(doc["seq"])
        self._events_since_snapshot = 0
        return self.snapshot_path

    def _rotate_log(self, seq: int) -> None:
        self.store.log.close()
        if self.log_path.exists() and self.log_path.stat().st_size > 0:
            os.replace(self.log_path, self.root / f"events-{seq:012d}.log")
        self.store.log = EventLog(self.log_path)

    def close(self) -> None:
        if self._events_since_snapshot:
            self.write_snapshot()
        self.store.log.close()


def read_all_records(store_root: Path | str) -> Iterator[EventRecord]:
    """Full event history of a store directory: sealed segments, then the
    active log, in seq order."""
    root = Path(store_root)
    for segment in sorted(root.glob("events-*.log")):
        yield from EventLog.read_records(segment)
    active = root / "events.log"
    if active.exists():
        yield from EventLog.read_records(active)
