"""Low-effort automatic association.

Two rules produce membership proposals: a reply inherits the contexts of
the mail it answers (at a discount), and an item repeatedly opened while
a context is current probably belongs there.  Accesses also reinforce
existing memberships slightly, so things the user keeps returning to
stay buoyant.
"""

from __future__ import annotations

import email
import email.policy
import email.utils
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .clock import iso, parse_iso
from .contexts import ContextManager, Membership, Origin
from .errors import UnknownMembership
from .graph import EdgeLabel, GraphStore, NodeKind

REPLY_DISCOUNT = 0.9
COACCESS_STRENGTH = 0.3
TOUCH_INCREMENT = 0.05


class Rule(str, Enum):
    REPLY = "REPLY"
    COACCESS = "COACCESS"


class ProposalStatus(str, Enum):
    PENDING = "PENDING"
    ACCEPTED = "ACCEPTED"
    REJECTED = "REJECTED"


class ApplyMode(str, Enum):
    AUTO = "AUTO"
    SUGGEST = "SUGGEST"


class AccessAction(str, Enum):
    OPEN = "OPEN"
    SAVE = "SAVE"
    SWITCH_IN = "SWITCH_IN"


@dataclass
class AccessEvent:
    ctx: str
    ts: datetime
    action: AccessAction
    item: str | None = None


@dataclass
class Proposal:
    id: str
    item: str
    ctx: str
    strength: float
    rule: Rule
    status: ProposalStatus = ProposalStatus.PENDING

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "item": self.item,
            "ctx": self.ctx,
            "strength": self.strength,
            "rule": self.rule.value,
            "status": self.status.value,
        }


@dataclass
class MailHeader:
    message_id: str
    in_reply_to: str | None
    references: list[str]
    sender: str
    recipients: str
    subject: str
    date: datetime | None


def parse_mail(raw: bytes) -> MailHeader:
    """Extract the threading-relevant headers from an RFC 5322 message."""
    msg = email.message_from_bytes(raw, policy=email.policy.default)
    refs = (msg.get("References") or "").split()
    date = None
    if msg.get("Date"):
        try:
            date = email.utils.parsedate_to_datetime(msg["Date"])
        except (TypeError, ValueError):
            date = None
    return MailHeader(
        message_id=(msg.get("Message-ID") or "").strip(),
        in_reply_to=(msg.get("In-Reply-To") or "").strip() or None,
        references=refs,
        sender=msg.get("From") or "",
        recipients=msg.get("To") or "",
        subject=msg.get("Subject") or "",
        date=date,
    )


class InferenceEngine:
    def __init__(self, store: GraphStore, contexts: ContextManager,
                 reply_mode: ApplyMode = ApplyMode.AUTO,
                 coaccess_mode: ApplyMode = ApplyMode.SUGGEST):
        self.store = store
        self.contexts = contexts
        self.reply_mode = reply_mode
        self.coaccess_mode = coaccess_mode
        self.proposals: dict[str, Proposal] = {}
        self._proposal_serial = 0

    # -- proposal bookkeeping -------------------------------------------

    def _new_proposal(self, item: str, ctx: str, strength: float, rule: Rule) -> Proposal:
        self._proposal_serial += 1
        proposal = Proposal(id=f"p{self._proposal_serial:06d}", item=item, ctx=ctx,
                            strength=strength, rule=rule)
        self.proposals[proposal.id] = proposal
        return proposal

    def pending(self) -> list[Proposal]:
        return sorted(
            (p for p in self.proposals.values() if p.status == ProposalStatus.PENDING),
            key=lambda p: p.id,
        )

    def _has_pending(self, item: str, ctx: str) -> bool:
        return any(
            p.item == item and p.ctx == ctx and p.status == ProposalStatus.PENDING
            for p in self.proposals.values()
        )

    # -- reply rule --------------------------------------------------------

    def mail_by_message_id(self, message_id: str) -> str | None:
        for node in self.store.nodes_of_kind(NodeKind.MAIL):
            if node.attrs.get("message_id") == message_id:
                return node.id
        return None

    def infer_reply_context(self, mail_id: str, now: datetime) -> list[Proposal]:
        """Propose the parent mail's contexts for a reply, discounted once."""
        mail = self.store.node(mail_id)
        parent_id = None
        in_reply_to = mail.attrs.get("in_reply_to")
        if in_reply_to:
            parent_id = self.mail_by_message_id(str(in_reply_to))
        if parent_id is None:
            for ref in reversed(str(mail.attrs.get("references", "")).split()):
                parent_id = self.mail_by_message_id(ref)
                if parent_id is not None:
                    break
        if parent_id is None or parent_id == mail_id:
            return []

        if not self.store.edges_between(mail_id, EdgeLabel.inReplyTo, parent_id):
            self.store.add_edge(mail_id, EdgeLabel.inReplyTo, parent_id, {}, now)

        created = []
        for parent_m in self.contexts.memberships_of_item(parent_id):
            if self.contexts.membership(parent_m.ctx, mail_id) is not None:
                continue
            if self._has_pending(mail_id, parent_m.ctx):
                continue
            strength = round(parent_m.strength * REPLY_DISCOUNT, 10)
            created.append(self._new_proposal(mail_id, parent_m.ctx, strength, Rule.REPLY))
        if created and self.reply_mode == ApplyMode.AUTO:
            self.apply_proposals(created, ApplyMode.AUTO, now)
        return created

    # -- co-access rule ---------------------------------------------------------

    def infer_coaccess(self, events: list[AccessEvent], window_minutes: float = 60.0,
                       min_count: int = 3) -> list[Proposal]:
        """Items opened/saved >= min_count times within one window while a
        context was current, without a membership there, become proposals.

        Pure in its event-list argument: same list, same proposals.
        """
        window = window_minutes * 60.0
        counts: dict[tuple[str, str], list[datetime]] = {}
        for ev in events:
            if ev.action in (AccessAction.OPEN, AccessAction.SAVE) and ev.item:
                counts.setdefault((ev.ctx, ev.item), []).append(ev.ts)
        created = []
        for (ctx, item), stamps in sorted(counts.items()):
            if not self.store.has_node(ctx) or not self.store.has_node(item):
                continue
            if self.contexts.membership(ctx, item) is not None:
                continue
            if self._has_pending(item, ctx):
                continue
            stamps.sort()
            hit = any(
                (stamps[i + min_count - 1] - stamps[i]).total_seconds() <= window
                for i in range(len(stamps) - min_count + 1)
            )
            if hit:
                created.append(self._new_proposal(item, ctx, COACCESS_STRENGTH, Rule.COACCESS))
        return created

    # -- application ---------------------------------------------------------------

    def apply_proposals(self, proposals: list[Proposal], mode: ApplyMode, now: datetime) -> int:
        """AUTO applies (origin INFERRED); SUGGEST leaves them for the inbox.

        A proposal whose membership appeared meanwhile is stale: marked
        REJECTED and skipped, never an exception.
        """
        if mode == ApplyMode.SUGGEST:
            return 0
        applied = 0
        for proposal in proposals:
            if proposal.status != ProposalStatus.PENDING:
                continue
            if self.contexts.membership(proposal.ctx, proposal.item) is not None:
                proposal.status = ProposalStatus.REJECTED  # STALE_PROPOSAL
                continue
            self.contexts.add_item(proposal.ctx, proposal.item, proposal.strength, Origin.INFERRED, now)
            proposal.status = ProposalStatus.ACCEPTED
            applied += 1
        return applied

    def reject(self, proposal_id: str) -> None:
        self.proposals[proposal_id].status = ProposalStatus.REJECTED

    # -- reinforcement -----------------------------------------------------------------

    def touch(self, item: str, ctx: str, now: datetime,
              access_log: list[AccessEvent] | None = None) -> Membership:
        """Record an access: bump strength by a small step, refresh last access."""
        m = self.contexts.membership(ctx, item)
        if m is None:
            raise UnknownMembership(f"{item} has no membership in {ctx}")
        new_strength = min(1.0, round(m.strength + TOUCH_INCREMENT, 10))
        last_access = max(now, m.last_access_at)
        self.store.set_edge_attrs(
            m.edge_id,
            {"strength": new_strength, "last_access_at": iso(last_access)},
            now,
        )
        if access_log is not None:
            access_log.append(AccessEvent(ctx=ctx, ts=now, action=AccessAction.OPEN, item=item))
        return self.contexts.membership(ctx, item)
