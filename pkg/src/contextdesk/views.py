"""Per-application views of a context and the deltas a switch produces.

A view is a tree: the context as the root, one collection per ACTIVE
sub-context (file views only), and one leaf per visible membership whose
item kind matches the view's filter.  Visibility follows the applied
forgetting measure: KEEP always, HIDE only on request, anything beyond
never.  Trees are deterministic, so facades can enumerate them and tests
can diff them byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .clock import iso
from .contexts import ContextManager, CtxState
from .errors import CtxNotActive, CtxRetracted, KindMismatch
from .graph import GraphStore, NodeKind


class ViewKind(str, Enum):
    FILES = "FILES"
    LINKS = "LINKS"
    CALENDAR = "CALENDAR"
    CONTACTS = "CONTACTS"
    MAILS = "MAILS"


KIND_FILTER: dict[ViewKind, frozenset[NodeKind]] = {
    ViewKind.FILES: frozenset({NodeKind.FILE, NodeKind.NOTE}),
    ViewKind.LINKS: frozenset({NodeKind.BOOKMARK}),
    ViewKind.CALENDAR: frozenset({NodeKind.EVENT}),
    ViewKind.CONTACTS: frozenset({NodeKind.CONTACT}),
    ViewKind.MAILS: frozenset({NodeKind.MAIL}),
}

VISIBLE_MEASURES = ("KEEP",)
VISIBLE_WITH_HIDDEN = ("KEEP", "HIDE")


@dataclass
class ViewNode:
    name: str
    node_id: str | None = None
    children: list["ViewNode"] | None = None  # None marks a leaf
    ref: str | None = None  # leaf payload ref (content hash) when present

    @property
    def is_collection(self) -> bool:
        return self.children is not None


@dataclass
class ViewTree:
    ctx: str
    kind: ViewKind
    generated_at: str
    root: ViewNode

    def path_map(self) -> dict[str, str | None]:
        """path -> node id for every node below the root, '/'-joined."""
        out: dict[str, str | None] = {}

        def walk(node: ViewNode, prefix: str) -> None:
            for child in node.children or []:
                path = f"{prefix}{child.name}"
                out[path + "/" if child.is_collection else path] = child.node_id
                if child.is_collection:
                    walk(child, path + "/")

        walk(self.root, "")
        return out

    def paths(self) -> list[str]:
        return sorted(self.path_map())

    def leaf_paths(self) -> list[str]:
        return sorted(p for p in self.path_map() if not p.endswith("/"))


@dataclass
class MovedPath:
    src: str
    dst: str

    def to_dict(self) -> dict:
        return {"from": self.src, "to": self.dst}


@dataclass
class ViewDelta:
    added: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)
    moved: list[MovedPath] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.moved)

    def to_dict(self) -> dict:
        return {"added": self.added, "removed": self.removed, "moved": [m.to_dict() for m in self.moved]}


def visible_memberships(contexts: ContextManager, ctx_id: str, include_hidden: bool):
    allowed = VISIBLE_WITH_HIDDEN if include_hidden else VISIBLE_MEASURES
    return [m for m in contexts.memberships_of(ctx_id) if m.measure in allowed]


def _dedupe(named: list[tuple[str, ViewNode]]) -> list[ViewNode]:
    """Suffix duplicate sibling names with a short id; keeps order."""
    seen: dict[str, int] = {}
    for name, _ in named:
        seen[name] = seen.get(name, 0) + 1
    out = []
    for name, node in named:
        if seen[name] > 1 and node.node_id:
            stem, dot, ext = name.rpartition(".")
            suffix = node.node_id[-6:]
            node.name = f"{stem}~{suffix}.{ext}" if dot else f"{name}~{suffix}"
        out.append(node)
    return out


def materialize(
    store: GraphStore,
    contexts: ContextManager,
    ctx_id: str,
    kind: ViewKind,
    now: datetime,
    include_hidden: bool = False,
) -> ViewTree:
    """Build the view tree for one context.

    Deterministic: collections first, then leaves, each name-ascending;
    duplicate sibling names get an id suffix.  Sub-context collections
    appear in FILES views only and only for ACTIVE sub-contexts.
    """
    ctx = contexts.context(ctx_id)
    if ctx.attrs.get("state") == CtxState.RETRACTED.value:
        raise CtxRetracted(f"{ctx_id} is retracted")
    wanted = KIND_FILTER[kind]

    def build(current: str) -> ViewNode:
        collections: list[tuple[str, ViewNode]] = []
        if kind == ViewKind.FILES:
            for child in contexts.children_of(current):
                if contexts.state(child) == CtxState.ACTIVE:
                    node = build(child)
                    collections.append((node.name, node))
        leaves: list[tuple[str, ViewNode]] = []
        for m in visible_memberships(contexts, current, include_hidden):
            item = store.node(m.item)
            if item.kind not in wanted:
                continue
            name = str(item.attrs.get("name", m.item))
            leaves.append(
                (name, ViewNode(name=name, node_id=item.id, ref=str(item.attrs.get("content_ref", "")) or None))
            )
        collections.sort(key=lambda pair: (pair[0], pair[1].node_id or ""))
        leaves.sort(key=lambda pair: (pair[0], pair[1].node_id or ""))
        children = _dedupe(collections) + _dedupe(leaves)
        node = store.node(current)
        return ViewNode(name=str(node.attrs.get("name", current)), node_id=current, children=children)

    return ViewTree(ctx=ctx_id, kind=kind, generated_at=iso(now), root=build(ctx_id))


def diff_views(old: ViewTree, new: ViewTree) -> ViewDelta:
    """Path-wise set difference; same node under a new path counts as moved."""
    if old.kind != new.kind:
        raise KindMismatch(f"cannot diff {old.kind.value} against {new.kind.value}")
    old_paths = old.path_map()
    new_paths = new.path_map()
    removed = sorted(set(old_paths) - set(new_paths))
    added = sorted(set(new_paths) - set(old_paths))

    removed_by_node: dict[str, list[str]] = {}
    for path in removed:
        node = old_paths[path]
        if node:
            removed_by_node.setdefault(node, []).append(path)
    moved: list[MovedPath] = []
    still_added = []
    for path in added:
        node = new_paths[path]
        candidates = removed_by_node.get(node or "", [])
        if node and candidates:
            moved.append(MovedPath(src=candidates.pop(0), dst=path))
        else:
            still_added.append(path)
    moved_srcs = {m.src for m in moved}
    return ViewDelta(
        added=still_added,
        removed=[p for p in removed if p not in moved_srcs],
        moved=moved,
    )


class ViewCache:
    """Per-(ctx, kind, hidden) cache keyed on the store's mutation version."""

    def __init__(self, store: GraphStore, contexts: ContextManager):
        self.store = store
        self.contexts = contexts
        self._cache: dict[tuple[str, ViewKind, bool], tuple[int, ViewTree]] = {}

    def get(self, ctx_id: str, kind: ViewKind, now: datetime, include_hidden: bool = False) -> ViewTree:
        key = (ctx_id, kind, include_hidden)
        hit = self._cache.get(key)
        if hit is not None and hit[0] == self.store.version:
            cached = hit[1]
            return ViewTree(ctx=cached.ctx, kind=cached.kind, generated_at=iso(now), root=cached.root)
        tree = materialize(self.store, self.contexts, ctx_id, kind, now, include_hidden)
        self._cache[key] = (self.store.version, tree)
        return tree


def on_context_switch(
    store: GraphStore,
    contexts: ContextManager,
    old_ctx: str | None,
    new_ctx: str,
    now: datetime,
    cache: ViewCache | None = None,
) -> dict[ViewKind, ViewDelta]:
    """Deltas every application view sees when the current context changes."""
    if contexts.state(new_ctx) != CtxState.ACTIVE:
        raise CtxNotActive(f"{new_ctx} is not active")
    deltas: dict[ViewKind, ViewDelta] = {}
    empty = ViewNode(name="", node_id=None, children=[])
    for kind in ViewKind:
        new_tree = (cache.get(new_ctx, kind, now) if cache
                    else materialize(store, contexts, new_ctx, kind, now))
        if old_ctx is not None and store.has_node(old_ctx):
            old_tree = (cache.get(old_ctx, kind, now) if cache
                        else materialize(store, contexts, old_ctx, kind, now))
        else:
            old_tree = ViewTree(ctx="", kind=kind, generated_at=iso(now), root=empty)
        deltas[kind] = diff_views(old_tree, new_tree)
    return deltas
