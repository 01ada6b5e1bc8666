"""Forgetting engine: buoyancy scoring and the escalating measure ladder.

A membership's *memory buoyancy* is its association strength decayed by
half-life over the time since last access.  One threshold band per
measure turns the continuous score into the escalation ladder

    KEEP < HIDE < CONDENSE < ARCHIVE < DELETE

which makes measure severity monotone in staleness by construction.
``tidy_up`` is the self-reorganization step: score and apply measures,
condense majority-stale contexts, then merge stale sub-contexts into
their parents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import IntEnum

from .clock import iso, parse_iso
from .content import ArchiveStore, ContentStore
from .contexts import ContextManager, CtxState, Membership
from .errors import ClockSkew, CtxIsCurrent, CtxNotWritable, CtxRetracted, InvariantViolation
from .graph import EdgeLabel, GraphStore, NodeKind


class Measure(IntEnum):
    KEEP = 0
    HIDE = 1
    CONDENSE = 2
    ARCHIVE = 3
    DELETE = 4

    def __str__(self) -> str:
        return self.name


@dataclass
class ForgettingPolicy:
    """User-tunable disposal preferences ("adjusted on a general level")."""

    half_life_days: float = 30.0
    hide_threshold: float = 0.5
    condense_threshold: float = 0.2
    archive_threshold: float = 0.1
    delete_threshold: float = 0.05
    allow_delete: bool = False
    min_retention_days: float = 365.0
    keep_top_k: int = 5

    def __post_init__(self):
        if self.half_life_days <= 0:
            raise InvariantViolation("half_life_days must be positive")
        if not (1.0 > self.hide_threshold > self.condense_threshold > self.archive_threshold > self.delete_threshold > 0.0):
            raise InvariantViolation("thresholds must be strictly descending within (0, 1)")
        if self.keep_top_k < 1:
            raise InvariantViolation("keep_top_k must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ForgettingPolicy":
        return cls(**{k: doc[k] for k in doc if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {
            "half_life_days": self.half_life_days,
            "hide_threshold": self.hide_threshold,
            "condense_threshold": self.condense_threshold,
            "archive_threshold": self.archive_threshold,
            "delete_threshold": self.delete_threshold,
            "allow_delete": self.allow_delete,
            "min_retention_days": self.min_retention_days,
            "keep_top_k": self.keep_top_k,
        }


SECONDS_PER_DAY = 86_400.0


def memory_buoyancy(m: Membership, now: datetime, policy: ForgettingPolicy) -> float:
    """strength * 2^(-age/half_life), age in fractional days since last access."""
    delta = (now - m.last_access_at).total_seconds()
    if delta < 0:
        raise ClockSkew(f"now {iso(now)} precedes last access {iso(m.last_access_at)}")
    return m.strength * 2.0 ** (-(delta / SECONDS_PER_DAY) / policy.half_life_days)


def classify_measure(mb: float, policy: ForgettingPolicy, pinned: bool) -> Measure:
    if pinned:
        return Measure.KEEP
    if mb >= policy.hide_threshold:
        return Measure.KEEP
    if mb >= policy.condense_threshold:
        return Measure.HIDE
    if mb >= policy.archive_threshold:
        return Measure.CONDENSE
    if mb >= policy.delete_threshold:
        return Measure.ARCHIVE
    return Measure.DELETE if policy.allow_delete else Measure.ARCHIVE


@dataclass
class ReorgAction:
    kind: str  # "measure" | "condense" | "condense-member" | "merge" | "delete" | "failure"
    ctx: str
    item: str | None
    old: str
    new: str
    reason: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ctx": self.ctx,
            "item": self.item,
            "old": self.old,
            "new": self.new,
            "reason": self.reason,
        }


@dataclass
class ReorgReport:
    now: str
    actions: list[ReorgAction] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"now": self.now, "actions": [a.to_dict() for a in self.actions]}

    def merges(self) -> list[tuple[str, str]]:
        return [(a.ctx, a.new) for a in self.actions if a.kind == "merge"]


class ForgettingEngine:
    def __init__(
        self,
        store: GraphStore,
        contexts: ContextManager,
        policy: ForgettingPolicy | None = None,
        content: ContentStore | None = None,
        archive: ArchiveStore | None = None,
    ):
        self.store = store
        self.contexts = contexts
        self.policy = policy or ForgettingPolicy()
        self.content = content
        self.archive = archive

    # -- scoring ---------------------------------------------------------

    def context_buoyancy(self, ctx_id: str, now: datetime, policy: ForgettingPolicy | None = None) -> float:
        policy = policy or self.policy
        ctx = self.contexts.context(ctx_id)
        if ctx.attrs.get("state") == CtxState.RETRACTED.value:
            raise CtxRetracted(f"{ctx_id} is retracted")
        last_current = parse_iso(ctx.attrs["last_current_at"])
        delta_days = max(0.0, (now - last_current).total_seconds() / SECONDS_PER_DAY)
        own = 2.0 ** (-delta_days / policy.half_life_days)
        member_mb = 0.0
        for m in self.contexts.memberships_of(ctx_id):
            member_mb = max(member_mb, memory_buoyancy(m, now, policy))
        return max(own, member_mb)

    # -- measures ----------------------------------------------------------

    def condense_context(
        self,
        ctx_id: str,
        now: datetime,
        policy: ForgettingPolicy | None = None,
        report: ReorgReport | None = None,
    ) -> str:
        """Keep pinned plus top-k members by buoyancy; stash the rest in a stub.

        Returns the stub node id.  Ties on buoyancy keep the lower item id.
        """
        policy = policy or self.policy
        state = self.contexts.state(ctx_id)
        if state not in (CtxState.ACTIVE, CtxState.HIDDEN):
            raise CtxNotWritable(f"cannot condense a {state.value} context")
        if self.contexts.current_context() == ctx_id:
            raise CtxIsCurrent(f"{ctx_id} is the current context")

        members = self.contexts.memberships_of(ctx_id)
        pinned = [m for m in members if m.pinned]
        rest = [m for m in members if not m.pinned]
        scored = sorted(
            ((memory_buoyancy(m, now, policy), m) for m in rest),
            key=lambda pair: (-pair[0], pair[1].item),
        )
        kept = {m.item for m in pinned} | {m.item for _, m in scored[: policy.keep_top_k]}
        removed = [m for _, m in scored[policy.keep_top_k :]]

        counts: dict[str, int] = {}
        for m in removed:
            kind = self.store.node(m.item).kind.value
            counts[f"count_{kind}"] = counts.get(f"count_{kind}", 0) + 1
        stub_attrs = {
            "name": f"condensed({len(removed)} items)",
            "ctx": ctx_id,
            "created_at": iso(now),
            "removed_count": len(removed),
            **counts,
        }
        stub = self.store.add_node(NodeKind.STUB, stub_attrs, now)
        self.store.add_edge(stub.id, EdgeLabel.isPartOf, ctx_id, {}, now)
        for m in removed:
            self.store.remove_edge(m.edge_id, now)
            self.store.add_edge(m.item, EdgeLabel.condensedInto, stub.id, {}, now)
            if report is not None:
                report.actions.append(
                    ReorgAction("condense-member", ctx_id, m.item, m.measure, "STUB", "condensed into stub")
                )
        self.store.set_node_attrs(ctx_id, {"state": CtxState.CONDENSED.value}, now)
        if report is not None:
            report.actions.append(
                ReorgAction("condense", ctx_id, None, state.value, CtxState.CONDENSED.value,
                            f"kept {len(kept)}, condensed {len(removed)}")
            )
        return stub.id

    def stub_removed_items(self, stub_id: str) -> list[str]:
        return self.store.neighbors(stub_id, EdgeLabel.condensedInto, "in")

    def merge_stale(
        self,
        now: datetime,
        policy: ForgettingPolicy | None = None,
        report: ReorgReport | None = None,
    ) -> list[tuple[str, str]]:
        """Merge every stale parented context into its parent, deepest first."""
        policy = policy or self.policy
        current = self.contexts.current_context()
        candidates = []
        for node in self.contexts.all_contexts():
            if node.id == current:
                continue
            parent = self.contexts.parent_of(node.id)
            if parent is None:
                continue
            if self.context_buoyancy(node.id, now, policy) < policy.condense_threshold:
                candidates.append((self.contexts.depth_of(node.id), node.id, parent))
        merges = []
        for _, src, parent in sorted(candidates, key=lambda t: (-t[0], t[1])):
            if self.contexts.state(src) == CtxState.RETRACTED:
                continue
            # parent may itself have merged away in this pass; follow it
            dst = parent
            while self.contexts.state(dst) == CtxState.RETRACTED:
                merged_into = self.store.neighbors(dst, EdgeLabel.mergedInto, "out")
                if not merged_into:
                    break
                dst = merged_into[0]
            self.contexts.merge_contexts(src, dst, now, require_active_dst=False)
            merges.append((src, dst))
            if report is not None:
                report.actions.append(
                    ReorgAction("merge", src, None, "ACTIVE", dst, "context buoyancy below condense threshold")
                )
        return merges

    # -- the tidy-up pass ---------------------------------------------------

    def tidy_up(self, now: datetime, policy: ForgettingPolicy | None = None) -> ReorgReport:
        """One full self-reorganization pass.

        Idempotent at fixed ``now``: measures are stored on memberships, so
        a second run sees no transitions and reports nothing.  The current
        context is exempt throughout; individual action failures are
        recorded in the report, never raised.
        """
        policy = policy or self.policy
        report = ReorgReport(now=iso(now))

        for ctx_node in sorted(self.contexts.all_contexts(), key=lambda n: n.id):
            ctx_id = ctx_node.id
            if ctx_id == self.contexts.current_context():
                continue
            try:
                self._tidy_context(ctx_id, now, policy, report)
            except Exception as exc:  # noqa: BLE001 - report, don't raise
                report.actions.append(ReorgAction("failure", ctx_id, None, "", "", str(exc)))

        self.merge_stale(now, policy, report)
        return report

    def _tidy_context(self, ctx_id: str, now: datetime, policy: ForgettingPolicy, report: ReorgReport) -> None:
        members = self.contexts.memberships_of(ctx_id)
        if not members:
            return
        targets: list[tuple[Membership, Measure, float]] = []
        for m in members:
            try:
                mb = memory_buoyancy(m, now, policy)
            except ClockSkew as exc:
                report.actions.append(ReorgAction("failure", ctx_id, m.item, m.measure, m.measure, str(exc)))
                continue
            target = classify_measure(mb, policy, m.pinned)
            if target == Measure.DELETE and not self._deletable(m, now, policy):
                target = Measure.ARCHIVE
            targets.append((m, target, mb))

        state = self.contexts.state(ctx_id)
        stale = sum(1 for _, t, _ in targets if t >= Measure.CONDENSE)
        if state in (CtxState.ACTIVE, CtxState.HIDDEN) and stale * 2 > len(members):
            self.condense_context(ctx_id, now, policy, report)
            remaining = {m.item for m in self.contexts.memberships_of(ctx_id)}
            targets = [(m, t, mb) for m, t, mb in targets if m.item in remaining]

        for m, target, mb in targets:
            if self.contexts.current_context() == ctx_id:
                break  # a switch mid-pass exempts the newly current context
            if target.name == m.measure:
                continue
            try:
                self._apply_measure(m, target, now)
            except Exception as exc:  # noqa: BLE001
                report.actions.append(ReorgAction("failure", ctx_id, m.item, m.measure, target.name, str(exc)))
                continue
            kind = "delete" if target == Measure.DELETE else "measure"
            report.actions.append(
                ReorgAction(kind, ctx_id, m.item, m.measure, target.name, f"mb={mb:.6f}")
            )

    def _deletable(self, m: Membership, now: datetime, policy: ForgettingPolicy) -> bool:
        if not policy.allow_delete:
            return False
        item = self.store.node(m.item)
        created = item.attrs.get("created_at")
        born = parse_iso(created) if created else m.created_at
        if (now - born).total_seconds() / SECONDS_PER_DAY <= policy.min_retention_days:
            return False
        # deleting destroys the node everywhere: require every membership
        # of this item to be in the delete band too
        for other in self.contexts.memberships_of_item(m.item):
            if other.ctx == self.contexts.current_context():
                return False
            if classify_measure(memory_buoyancy(other, now, policy), policy, other.pinned) != Measure.DELETE:
                return False
        return True

    def _apply_measure(self, m: Membership, target: Measure, now: datetime) -> None:
        item = self.store.node(m.item)
        if target == Measure.DELETE:
            ref = item.attrs.get("content_ref")
            if ref and self.content is not None:
                self.content.remove(str(ref))
            self.store.remove_node(m.item, now)
            return
        was_archived = m.measure == Measure.ARCHIVE.name
        if target == Measure.ARCHIVE and not was_archived:
            ref = item.attrs.get("content_ref")
            if ref and self.content is not None and self.archive is not None:
                self.archive.archive(m.item, str(ref), self.content, str(item.attrs.get("name", "")), now)
        elif was_archived and target < Measure.ARCHIVE:
            ref = item.attrs.get("content_ref")
            if ref and self.content is not None and self.archive is not None:
                self.archive.restore(m.item, str(ref), self.content, now)
        self.store.set_edge_attrs(m.edge_id, {"measure": target.name}, now)

    def restore_if_archived(self, ctx_id: str, item_id: str, now: datetime) -> None:
        """Bring an archived membership back to KEEP (used by pinning)."""
        m = self.contexts.membership(ctx_id, item_id)
        if m is not None and m.measure == Measure.ARCHIVE.name:
            self._apply_measure(m, Measure.KEEP, now)
