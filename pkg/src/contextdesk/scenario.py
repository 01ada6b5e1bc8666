"""Scripted scenario runner with a virtual clock.

A script is newline-delimited JSON, one step per line:

    {"at": "2026-01-01T09:00:00Z", "action": "create-context", "name": "XY", "alias": "xy"}
    {"at": "+200d", "action": "tidyup"}
    {"at": "+0d", "action": "assert", "kind": "membership", "ctx": "@xy", ...}

``at`` is absolute RFC 3339 or an offset (+Nd / +Nh / +Nm) from the
previous step; offsets never go backwards.  ``alias`` names the created
context/item for later steps, referenced as ``@alias``; plain strings
resolve by name.  The run is deterministic: the virtual clock is pinned
to each step's instant and ids come from the store's counter.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .clock import VirtualClock, parse_iso
from .contexts import Origin
from .graph import NodeKind
from .service import DeskService

OFFSET_RE = re.compile(r"^\+(\d+(?:\.\d+)?)([dhm])$")
OFFSET_UNIT = {"d": 86400.0, "h": 3600.0, "m": 60.0}


class ScenarioError(Exception):
    pass


class AssertionFailed(ScenarioError):
    pass


@dataclass
class ScenarioResult:
    steps: int = 0
    asserts_passed: int = 0
    log: list[str] = field(default_factory=list)


def load_script(path: Path | str) -> list[dict]:
    steps = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            step = json.loads(line)
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: not valid JSON: {exc}") from exc
        if "action" not in step:
            raise ScenarioError(f"line {lineno}: step has no action")
        steps.append(step)
    return steps


class ScenarioRunner:
    def __init__(self, service: DeskService):
        self.service = service
        if not isinstance(service.clock, VirtualClock):
            raise ScenarioError("scenario mode needs a service on a virtual clock")
        self.clock: VirtualClock = service.clock
        self.aliases: dict[str, str] = {}
        self.result = ScenarioResult()

    # -- reference resolution ------------------------------------------------

    def _ref_context(self, ref: str) -> str:
        if ref.startswith("@"):
            try:
                return self.aliases[ref[1:]]
            except KeyError:
                raise ScenarioError(f"unknown alias {ref}") from None
        matches = [
            n.id for n in self.service.contexts.all_contexts(include_retracted=True)
            if n.attrs.get("name") == ref
        ]
        if len(matches) != 1:
            raise ScenarioError(f"context name {ref!r} resolves to {len(matches)} contexts")
        return matches[0]

    def _ref_item(self, ref: str) -> str:
        if ref.startswith("@"):
            try:
                return self.aliases[ref[1:]]
            except KeyError:
                raise ScenarioError(f"unknown alias {ref}") from None
        matches = [
            n.id for n in self.service.graph.nodes.values()
            if n.kind != NodeKind.CONTEXT and n.attrs.get("name") == ref
        ]
        if len(matches) != 1:
            raise ScenarioError(f"item name {ref!r} resolves to {len(matches)} items")
        return matches[0]

    # -- execution -------------------------------------------------------------

    def _advance(self, at_spec: str | None, first: bool) -> datetime:
        if at_spec is None:
            return self.clock.now()
        match = OFFSET_RE.match(at_spec.strip())
        if match:
            seconds = float(match.group(1)) * OFFSET_UNIT[match.group(2)]
            target = self.clock.now() + timedelta(seconds=seconds)
        else:
            target = parse_iso(at_spec)
            if first:  # the script's first absolute instant is the epoch
                self.clock.set(target)
                return target
        if target < self.clock.now():
            raise ScenarioError(f"step timestamps must be non-decreasing ({at_spec})")
        self.clock.set(target)
        return target

    def run(self, steps: list[dict]) -> ScenarioResult:
        for index, step in enumerate(steps, start=1):
            now = self._advance(step.get("at"), first=index == 1)
            action = step["action"]
            try:
                self._execute(action, step, now)
            except AssertionFailed as exc:
                raise AssertionFailed(f"step {index} [{action}]: {exc}") from None
            except ScenarioError as exc:
                raise ScenarioError(f"step {index} [{action}]: {exc}") from None
            self.result.steps += 1
        return self.result

    def _execute(self, action: str, step: dict, now: datetime) -> None:
        service = self.service
        if action == "create-context":
            parent = self._ref_context(step["parent"]) if step.get("parent") else None
            ctx = service.create_context(str(step["name"]), parent, now=now)
            if step.get("alias"):
                self.aliases[step["alias"]] = ctx
        elif action == "add-item":
            ctx = self._ref_context(step["ctx"])
            kind = NodeKind(step.get("kind", "FILE"))
            content = step.get("content", "").encode() if step.get("content") else None
            attrs = step.get("attrs") or {}
            item = service.create_item(kind, str(step["name"]), attrs=attrs, content=content, now=now)
            service.add_item(
                ctx, item,
                float(step.get("strength", 1.0)),
                Origin(step.get("origin", "USER")),
                pinned=bool(step.get("pinned", False)),
                now=now,
            )
            if step.get("alias"):
                self.aliases[step["alias"]] = item
        elif action == "touch":
            service.touch(self._ref_item(step["item"]), self._ref_context(step["ctx"]), now=now)
        elif action == "switch":
            service.set_current(self._ref_context(step["ctx"]), now=now)
        elif action == "ingest-mail":
            raw = self._mail_bytes(step)
            ctx = self._ref_context(step["ctx"]) if step.get("ctx") else None
            mail = service.ingest_mail(raw, ctx_id=ctx, now=now)
            if step.get("alias"):
                self.aliases[step["alias"]] = mail
        elif action == "tidyup":
            report = service.tidy_up(now=now)
            self.result.log.append(f"tidyup at {now.isoformat()}: {len(report.actions)} actions")
        elif action == "assert":
            self._assert(step, now)
            self.result.asserts_passed += 1
        else:
            raise ScenarioError(f"unknown action {action!r}")

    def _mail_bytes(self, step: dict) -> bytes:
        if step.get("file"):
            return Path(step["file"]).read_bytes()
        headers = [
            f"Message-ID: {step.get('message_id', '<gen@scenario>')}",
            f"From: {step.get('from', 'scenario@example.org')}",
            f"To: {step.get('to', 'desk@example.org')}",
            f"Subject: {step.get('subject', 'scenario mail')}",
        ]
        if step.get("in_reply_to"):
            headers.append(f"In-Reply-To: {step['in_reply_to']}")
        body = step.get("body", "")
        return ("\r\n".join(headers) + "\r\n\r\n" + body).encode()

    # -- assertions ------------------------------------------------------------------

    def _assert(self, step: dict, now: datetime) -> None:
        kind = step.get("kind")
        service = self.service
        if kind == "context-state":
            ctx = self._ref_context(step["ctx"])
            got = service.contexts.state(ctx).value
            if got != step["equals"]:
                raise AssertionFailed(f"context {step['ctx']} state {got} != {step['equals']}")
        elif kind == "member-count":
            ctx = self._ref_context(step["ctx"])
            got = len(service.contexts.memberships_of(ctx))
            if got != int(step["equals"]):
                raise AssertionFailed(f"{step['ctx']} has {got} members, expected {step['equals']}")
        elif kind == "membership":
            ctx = self._ref_context(step["ctx"])
            item = self._ref_item(step["item"])
            m = service.contexts.membership(ctx, item)
            if step.get("exists") is False:
                if m is not None:
                    raise AssertionFailed(f"{step['item']} unexpectedly in {step['ctx']}")
                return
            if m is None:
                raise AssertionFailed(f"{step['item']} not in {step['ctx']}")
            if "measure" in step and m.measure != step["measure"]:
                raise AssertionFailed(f"{step['item']} measure {m.measure} != {step['measure']}")
            if "strength" in step and abs(m.strength - float(step["strength"])) > 1e-9:
                raise AssertionFailed(f"{step['item']} strength {m.strength} != {step['strength']}")
            if "pinned" in step and m.pinned != bool(step["pinned"]):
                raise AssertionFailed(f"{step['item']} pinned {m.pinned} != {step['pinned']}")
        elif kind == "merged-into":
            src = self._ref_context(step["src"])
            dst = self._ref_context(step["dst"])
            targets = service.graph.neighbors(src, direction="out")
            from .graph import EdgeLabel

            merged = service.graph.neighbors(src, EdgeLabel.mergedInto, "out")
            if dst not in merged:
                raise AssertionFailed(f"{step['src']} not merged into {step['dst']} (edges: {targets})")
        elif kind == "current":
            ctx = self._ref_context(step["ctx"])
            if service.contexts.current_context() != ctx:
                raise AssertionFailed(f"current context is not {step['ctx']}")
        elif kind == "unfiled-count":
            got = len(service.contexts.unfiled_items())
            if got != int(step["equals"]):
                raise AssertionFailed(f"{got} unfiled items, expected {step['equals']}")
        else:
            raise ScenarioError(f"unknown assert kind {kind!r}")
