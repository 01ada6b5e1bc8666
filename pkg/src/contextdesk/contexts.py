"""Context spaces: first-class, user-manipulable containers for items.

Contexts are CONTEXT nodes; the hierarchy is a forest of hasSubContext
edges; a membership is a containsItem edge from context to item carrying
strength, origin, access timestamps, pinned flag, and the last applied
forgetting measure.  Structural operations (merge, split, retract) move
memberships, never items, so the set of information items in the store
is conserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from .clock import iso, parse_iso
from .errors import (
    CtxIsCurrent,
    CtxNotActive,
    CtxNotWritable,
    BadStrength,
    EmptyName,
    InvariantViolation,
    MergeSelf,
    PartialAssignment,
    SrcIsCurrent,
    UnknownIdError,
    UnknownMembership,
    UnknownParent,
    ParentNotActive,
)
from .graph import ITEM_KINDS, Edge, EdgeLabel, GraphStore, Node, NodeKind


class CtxState(str, Enum):
    ACTIVE = "ACTIVE"
    HIDDEN = "HIDDEN"
    CONDENSED = "CONDENSED"
    ARCHIVED = "ARCHIVED"
    RETRACTED = "RETRACTED"


WRITABLE_STATES = (CtxState.ACTIVE, CtxState.HIDDEN)


class Origin(str, Enum):
    USER = "USER"
    INFERRED = "INFERRED"
    PROTOCOL = "PROTOCOL"


@dataclass
class Membership:
    """View over one containsItem edge."""

    edge_id: str
    ctx: str
    item: str
    strength: float
    origin: Origin
    created_at: datetime
    last_access_at: datetime
    pinned: bool
    measure: str  # last applied forgetting measure, "KEEP" until tidied

    @classmethod
    def from_edge(cls, edge: Edge) -> "Membership":
        a = edge.attrs
        return cls(
            edge_id=edge.id,
            ctx=edge.src,
            item=edge.dst,
            strength=float(a["strength"]),
            origin=Origin(a.get("origin", "USER")),
            created_at=parse_iso(a["created_at"]),
            last_access_at=parse_iso(a["last_access_at"]),
            pinned=bool(a.get("pinned", False)),
            measure=str(a.get("measure", "KEEP")),
        )

    def to_dict(self) -> dict:
        return {
            "ctx": self.ctx,
            "item": self.item,
            "strength": self.strength,
            "origin": self.origin.value,
            "created_at": iso(self.created_at),
            "last_access_at": iso(self.last_access_at),
            "pinned": self.pinned,
            "measure": self.measure,
        }


@dataclass
class MergeReport:
    src: str
    dst: str
    moved_items: list[str]
    reparented: list[str]

    def to_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "moved_items": self.moved_items, "reparented": self.reparented}


@dataclass
class ReassignReport:
    ctx: str
    moved_to_parent: list[str]
    unfiled: list[str]
    reparented: list[str]

    def to_dict(self) -> dict:
        return {
            "ctx": self.ctx,
            "moved_to_parent": self.moved_to_parent,
            "unfiled": self.unfiled,
            "reparented": self.reparented,
        }


class ContextManager:
    """Context-space operations over a GraphStore.

    All mutations go through the store's apply path; this layer adds no
    state beyond a cached current-context pointer (also persisted as a
    node attr so it survives recovery).
    """

    def __init__(self, store: GraphStore):
        self.store = store
        self._current: str | None = None
        for node in store.nodes_of_kind(NodeKind.CONTEXT):
            if node.attrs.get("is_current"):
                self._current = node.id

    # -- lookups --------------------------------------------------------

    def context(self, ctx_id: str) -> Node:
        node = self.store.node(ctx_id)
        if node.kind != NodeKind.CONTEXT:
            raise UnknownIdError(f"{ctx_id} is not a context")
        return node

    def state(self, ctx_id: str) -> CtxState:
        return CtxState(self.context(ctx_id).attrs.get("state", "ACTIVE"))

    def parent_of(self, ctx_id: str) -> str | None:
        self.context(ctx_id)
        edges = self.store.in_edges(ctx_id, EdgeLabel.hasSubContext)
        return edges[0].src if edges else None

    def children_of(self, ctx_id: str) -> list[str]:
        self.context(ctx_id)
        return self.store.neighbors(ctx_id, EdgeLabel.hasSubContext, "out")

    def all_contexts(self, include_retracted: bool = False) -> list[Node]:
        out = []
        for node in self.store.nodes_of_kind(NodeKind.CONTEXT):
            if include_retracted or node.attrs.get("state", "ACTIVE") != CtxState.RETRACTED.value:
                out.append(node)
        return sorted(out, key=lambda n: n.id)

    def roots(self) -> list[str]:
        return [n.id for n in self.all_contexts() if self.parent_of(n.id) is None]

    def depth_of(self, ctx_id: str) -> int:
        depth, cursor = 0, self.parent_of(ctx_id)
        while cursor is not None:
            depth += 1
            cursor = self.parent_of(cursor)
        return depth

    def memberships_of(self, ctx_id: str) -> list[Membership]:
        self.context(ctx_id)
        edges = self.store.out_edges(ctx_id, EdgeLabel.containsItem)
        return sorted((Membership.from_edge(e) for e in edges), key=lambda m: m.item)

    def membership(self, ctx_id: str, item_id: str) -> Membership | None:
        edges = self.store.edges_between(ctx_id, EdgeLabel.containsItem, item_id)
        return Membership.from_edge(edges[0]) if edges else None

    def memberships_of_item(self, item_id: str) -> list[Membership]:
        edges = self.store.in_edges(item_id, EdgeLabel.containsItem)
        return sorted((Membership.from_edge(e) for e in edges), key=lambda m: m.ctx)

    def pinned_items(self, ctx_id: str) -> set[str]:
        return {m.item for m in self.memberships_of(ctx_id) if m.pinned}

    def unfiled_items(self) -> list[str]:
        """Items with zero memberships, sorted by id."""
        out = []
        for node in self.store.nodes.values():
            if node.kind in ITEM_KINDS and not self.store.in_edges(node.id, EdgeLabel.containsItem):
                out.append(node.id)
        return sorted(out)

    def current_context(self) -> str | None:
        return self._current

    def is_forest(self) -> bool:
        """No context is its own ancestor, and at most one parent each."""
        for node in self.store.nodes_of_kind(NodeKind.CONTEXT):
            if len(self.store.in_edges(node.id, EdgeLabel.hasSubContext)) > 1:
                return False
            seen = {node.id}
            cursor = self.parent_of(node.id)
            while cursor is not None:
                if cursor in seen:
                    return False
                seen.add(cursor)
                cursor = self.parent_of(cursor)
        return True

    # -- operations -------------------------------------------------------

    def create_context(self, name: str, parent: str | None, now: datetime) -> str:
        if not name:
            raise EmptyName("context name must be nonempty")
        if parent is not None:
            try:
                parent_node = self.context(parent)
            except UnknownIdError:
                raise UnknownParent(f"no such parent context: {parent}") from None
            if parent_node.attrs.get("state", "ACTIVE") != CtxState.ACTIVE.value:
                raise ParentNotActive(f"parent {parent} is {parent_node.attrs.get('state')}")
        node = self.store.add_node(
            NodeKind.CONTEXT,
            {
                "name": name,
                "state": CtxState.ACTIVE.value,
                "created_at": iso(now),
                "last_current_at": iso(now),
            },
            now,
        )
        if parent is not None:
            self.store.add_edge(parent, EdgeLabel.hasSubContext, node.id, {}, now)
        return node.id

    def add_item(
        self,
        ctx_id: str,
        item_id: str,
        strength: float,
        origin: Origin,
        now: datetime,
        pinned: bool = False,
    ) -> Membership:
        ctx = self.context(ctx_id)
        state = CtxState(ctx.attrs.get("state", "ACTIVE"))
        if state not in WRITABLE_STATES:
            raise CtxNotWritable(f"context {ctx_id} is {state.value}")
        item = self.store.node(item_id)
        if item.kind not in ITEM_KINDS:
            raise InvariantViolation(f"{item_id} ({item.kind.value}) is not an information item")
        if not (0.0 < strength <= 1.0):
            raise BadStrength(f"strength {strength} outside (0, 1]")
        existing = self.membership(ctx_id, item_id)
        if existing is not None:
            updates = {
                "strength": max(existing.strength, strength),
                "last_access_at": iso(now),
            }
            if pinned and not existing.pinned:
                updates["pinned"] = True
            self.store.set_edge_attrs(existing.edge_id, updates, now)
            return self.membership(ctx_id, item_id)
        edge = self.store.add_edge(
            ctx_id,
            EdgeLabel.containsItem,
            item_id,
            {
                "strength": strength,
                "origin": origin.value,
                "created_at": iso(now),
                "last_access_at": iso(now),
                "pinned": pinned,
                "measure": "KEEP",
            },
            now,
        )
        return Membership.from_edge(edge)

    def remove_item(self, ctx_id: str, item_id: str, now: datetime) -> bool:
        self.context(ctx_id)
        self.store.node(item_id)
        existing = self.membership(ctx_id, item_id)
        if existing is None:
            return False
        self.store.remove_edge(existing.edge_id, now)
        return True

    def set_pinned(self, ctx_id: str, item_id: str, pinned: bool, now: datetime) -> Membership:
        existing = self.membership(ctx_id, item_id)
        if existing is None:
            raise UnknownMembership(f"{item_id} not in {ctx_id}")
        updates: dict = {"pinned": pinned}
        if pinned:
            updates["measure"] = "KEEP"
        self.store.set_edge_attrs(existing.edge_id, updates, now)
        return self.membership(ctx_id, item_id)

    def set_current(self, ctx_id: str, now: datetime) -> tuple[str | None, str]:
        ctx = self.context(ctx_id)
        if ctx.attrs.get("state", "ACTIVE") != CtxState.ACTIVE.value:
            raise CtxNotActive(f"context {ctx_id} is {ctx.attrs.get('state')}")
        old = self._current
        if old is not None and old != ctx_id and self.store.has_node(old):
            self.store.set_node_attrs(old, {}, now, unset=["is_current"])
        self.store.set_node_attrs(ctx_id, {"is_current": True, "last_current_at": iso(now)}, now)
        self._current = ctx_id
        return old, ctx_id

    def merge_contexts(self, src: str, dst: str, now: datetime, require_active_dst: bool = True) -> MergeReport:
        if src == dst:
            raise MergeSelf("cannot merge a context into itself")
        src_node, dst_node = self.context(src), self.context(dst)
        if self._current == src:
            raise SrcIsCurrent(f"{src} is the current context")
        if src_node.attrs.get("state") == CtxState.RETRACTED.value:
            raise CtxNotWritable(f"source {src} already retracted")
        if require_active_dst and dst_node.attrs.get("state", "ACTIVE") != CtxState.ACTIVE.value:
            raise CtxNotActive(f"destination {dst} is {dst_node.attrs.get('state')}")

        moved = []
        for m in self.memberships_of(src):
            self.move_membership(m, dst, now)
            moved.append(m.item)

        # if dst lives underneath src, detach it first so re-parenting
        # src's children cannot create a cycle
        if self._is_ancestor(src, dst):
            self._set_parent(dst, self.parent_of(src), now)
        reparented = []
        for child in self.children_of(src):
            if child == dst:
                continue
            self._set_parent(child, dst, now)
            reparented.append(child)

        self.store.set_node_attrs(src, {"state": CtxState.RETRACTED.value}, now)
        self.store.add_edge(src, EdgeLabel.mergedInto, dst, {}, now)
        return MergeReport(src=src, dst=dst, moved_items=moved, reparented=reparented)

    def split_context(
        self,
        ctx_id: str,
        name_a: str,
        name_b: str,
        assignment: dict[str, str],
        now: datetime,
    ) -> tuple[str, str]:
        if not name_a or not name_b:
            raise EmptyName("split names must be nonempty")
        if name_a == name_b:
            raise InvariantViolation("split names must be distinct")
        self.context(ctx_id)
        if self._current == ctx_id:
            raise CtxIsCurrent(f"{ctx_id} is the current context")
        members = self.memberships_of(ctx_id)
        missing = [m.item for m in members if assignment.get(m.item) not in ("A", "B")]
        if missing:
            raise PartialAssignment(f"unassigned members: {missing}")

        parent = self.parent_of(ctx_id)
        ctx_a = self.create_context(name_a, parent, now)
        ctx_b = self.create_context(name_b, parent, now)
        for m in members:
            target = ctx_a if assignment[m.item] == "A" else ctx_b
            self.move_membership(m, target, now)
        for child in self.children_of(ctx_id):
            self._set_parent(child, parent, now)
        self.store.set_node_attrs(ctx_id, {"state": CtxState.RETRACTED.value}, now)
        self.store.add_edge(ctx_id, EdgeLabel.splitInto, ctx_a, {}, now)
        self.store.add_edge(ctx_id, EdgeLabel.splitInto, ctx_b, {}, now)
        return ctx_a, ctx_b

    def retract_context(self, ctx_id: str, now: datetime) -> ReassignReport:
        self.context(ctx_id)
        if self._current == ctx_id:
            raise CtxIsCurrent(f"{ctx_id} is the current context")
        parent = self.parent_of(ctx_id)
        moved, unfiled = [], []
        for m in self.memberships_of(ctx_id):
            if parent is not None:
                self.move_membership(m, parent, now)
                moved.append(m.item)
            else:
                self.store.remove_edge(m.edge_id, now)
                unfiled.append(m.item)
        reparented = []
        for child in self.children_of(ctx_id):
            self._set_parent(child, parent, now)
            reparented.append(child)
        self.store.set_node_attrs(ctx_id, {"state": CtxState.RETRACTED.value}, now)
        return ReassignReport(ctx=ctx_id, moved_to_parent=moved, unfiled=unfiled, reparented=reparented)

    # -- internals ---------------------------------------------------------

    def _is_ancestor(self, maybe_ancestor: str, ctx_id: str) -> bool:
        cursor = self.parent_of(ctx_id)
        while cursor is not None:
            if cursor == maybe_ancestor:
                return True
            cursor = self.parent_of(cursor)
        return False

    def _set_parent(self, ctx_id: str, new_parent: str | None, now: datetime) -> None:
        for edge in self.store.in_edges(ctx_id, EdgeLabel.hasSubContext):
            self.store.remove_edge(edge.id, now)
        if new_parent is not None:
            self.store.add_edge(new_parent, EdgeLabel.hasSubContext, ctx_id, {}, now)

    def move_membership(self, m: Membership, dst: str, now: datetime) -> None:
        """Move membership to dst: max-strength on conflict, pinned survives."""
        existing = self.membership(dst, m.item)
        if existing is None:
            attrs = {
                "strength": m.strength,
                "origin": m.origin.value,
                "created_at": iso(m.created_at),
                "last_access_at": iso(m.last_access_at),
                "pinned": m.pinned,
                "measure": m.measure,
            }
            self.store.remove_edge(m.edge_id, now)
            self.store.add_edge(dst, EdgeLabel.containsItem, m.item, attrs, now)
        else:
            self.store.set_edge_attrs(
                existing.edge_id,
                {
                    "strength": max(existing.strength, m.strength),
                    "last_access_at": iso(max(existing.last_access_at, m.last_access_at)),
                    "pinned": existing.pinned or m.pinned,
                    "measure": min(existing.measure, m.measure, key=_measure_rank),
                },
                now,
            )
            self.store.remove_edge(m.edge_id, now)


_MEASURE_ORDER = ["KEEP", "HIDE", "CONDENSE", "ARCHIVE", "DELETE"]


def _measure_rank(measure: str) -> int:
    return _MEASURE_ORDER.index(measure)
