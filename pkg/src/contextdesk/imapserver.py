"""Read-only IMAP facade: mail-bearing contexts as mailboxes.

A mailbox is an ACTIVE context with at least one visible MAIL member;
SELECT pins the message list of that moment (a later context switch
never retargets an open session).  Supported: CAPABILITY, LOGIN, LIST,
SELECT, EXAMINE, FETCH, UID FETCH, NOOP, LOGOUT.  Anything that would
write (STORE, APPEND, ...) answers NO; unparseable lines answer BAD.
"""

from __future__ import annotations

import email.utils
import socketserver
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .contexts import CtxState
from .graph import IdGenerator
from .service import DeskService
from .views import ViewKind

CRLF = "\r\n"


class SessionState(Enum):
    NOT_AUTH = "NOT_AUTH"
    AUTH = "AUTH"
    SELECTED = "SELECTED"
    CLOSED = "CLOSED"


def _tokenize(line: str) -> list[str]:
    """Split an IMAP command line, honoring double quotes."""
    out, buf, quoted = [], [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == " " and not quoted:
            if buf:
                out.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _nstring(value: str | None) -> str:
    if not value:
        return "NIL"
    return _quote(value)


def _address_list(header_value: str) -> str:
    if not header_value:
        return "NIL"
    parsed = email.utils.getaddresses([header_value])
    parts = []
    for name, addr in parsed:
        mailbox, _, host = addr.partition("@")
        parts.append(f"({_nstring(name)} NIL {_nstring(mailbox)} {_nstring(host)})")
    return "(" + "".join(parts) + ")" if parts else "NIL"


@dataclass
class Selected:
    ctx: str
    items: list[str] = field(default_factory=list)  # seq number order


class ImapSession:
    def __init__(self, service: DeskService):
        self.service = service
        self.state = SessionState.NOT_AUTH
        self.selected: Selected | None = None

    # -- mailbox naming ---------------------------------------------------

    def mailboxes(self, now: datetime) -> list[tuple[str, str]]:
        """(name, ctx id): ACTIVE contexts holding >= 1 visible mail."""
        contexts = [
            n for n in self.service.contexts.all_contexts()
            if n.attrs.get("state", "ACTIVE") == CtxState.ACTIVE.value
        ]
        counts: dict[str, int] = {}
        for node in contexts:
            counts[str(node.attrs.get("name"))] = counts.get(str(node.attrs.get("name")), 0) + 1
        out = []
        for node in contexts:
            tree = self.service.materialize(node.id, ViewKind.MAILS, now=now)
            if not (tree.root.children or []):
                continue
            name = str(node.attrs.get("name"))
            if counts[name] > 1:
                name = f"{name}~{node.id[-6:]}"
            out.append((name, node.id))
        return sorted(out)

    # -- command dispatch ------------------------------------------------------

    def greeting(self) -> str:
        return "* OK [CAPABILITY IMAP4rev1] contextdesk ready"

    def handle_line(self, line: str, now: datetime) -> tuple[list[str], bool]:
        """One tagged command in, response lines out, plus close flag."""
        line = line.rstrip("\r\n")
        if not line.strip():
            return ["* BAD empty command"], False
        tokens = _tokenize(line)
        if len(tokens) < 2:
            return [f"{tokens[0]} BAD missing command" if tokens else "* BAD malformed"], False
        tag, command = tokens[0], tokens[1].upper()
        args = tokens[2:]
        if command == "UID" and args and args[0].upper() == "FETCH":
            command, args = "UID FETCH", args[1:]

        handlers = {
            "CAPABILITY": self._capability,
            "NOOP": self._noop,
            "LOGOUT": self._logout,
            "LOGIN": self._login,
            "LIST": self._list,
            "SELECT": self._select,
            "EXAMINE": self._select,
            "FETCH": self._fetch,
            "UID FETCH": self._uid_fetch,
        }
        if command in ("STORE", "APPEND", "CREATE", "DELETE", "RENAME", "EXPUNGE", "COPY"):
            return [f"{tag} NO {command} is not available on a read-only facade"], False
        handler = handlers.get(command)
        if handler is None:
            return [f"{tag} BAD unknown command"], False
        return handler(tag, args, now)

    def _capability(self, tag, args, now):  # noqa: ARG002
        return [f"* CAPABILITY IMAP4rev1", f"{tag} OK CAPABILITY completed"], False

    def _noop(self, tag, args, now):  # noqa: ARG002
        return [f"{tag} OK NOOP completed"], False

    def _logout(self, tag, args, now):  # noqa: ARG002
        self.state = SessionState.CLOSED
        return ["* BYE contextdesk signing off", f"{tag} OK LOGOUT completed"], True

    def _login(self, tag, args, now):  # noqa: ARG002
        if len(args) != 2:
            return [f"{tag} BAD LOGIN expects user and password"], False
        user, password = args
        if user == self.service.config.user and password == self.service.config.password:
            self.state = SessionState.AUTH
            return [f"{tag} OK LOGIN completed"], False
        return [f"{tag} NO LOGIN failed"], False

    def _require_auth(self, tag):
        if self.state in (SessionState.AUTH, SessionState.SELECTED):
            return None
        return [f"{tag} NO not authenticated"]

    def _list(self, tag, args, now):
        denied = self._require_auth(tag)
        if denied:
            return denied, False
        lines = [
            f'* LIST (\\HasNoChildren) "/" {_quote(name)}'
            for name, _ in self.mailboxes(now)
        ]
        return lines + [f"{tag} OK LIST completed"], False

    def _select(self, tag, args, now):
        denied = self._require_auth(tag)
        if denied:
            return denied, False
        if not args:
            return [f"{tag} BAD SELECT expects a mailbox"], False
        wanted = args[0]
        match = next((cid for name, cid in self.mailboxes(now) if name == wanted), None)
        if match is None:
            return [f"{tag} NO no such mailbox"], False
        tree = self.service.materialize(match, ViewKind.MAILS, now=now)
        items = [child.node_id for child in tree.root.children or []]
        self.selected = Selected(ctx=match, items=items)
        self.state = SessionState.SELECTED
        return [
            f"* {len(items)} EXISTS",
            "* 0 RECENT",
            "* FLAGS (\\Seen)",
            "* OK [UIDVALIDITY 1] UIDs valid",
            f"{tag} OK [READ-ONLY] SELECT completed",
        ], False

    # -- FETCH -----------------------------------------------------------------

    def _parse_set(self, spec: str, count: int, by_uid: bool = False) -> list[int]:
        """Message numbers (1-based positions) named by a sequence set."""
        chosen: set[int] = set()
        uids = [self._uid(i) for i in self.selected.items] if by_uid else []
        for part in spec.split(","):
            if ":" in part:
                lo_s, hi_s = part.split(":", 1)
            else:
                lo_s = hi_s = part
            if by_uid:
                lo = int(lo_s) if lo_s != "*" else (max(uids) if uids else 0)
                hi = int(hi_s) if hi_s != "*" else (max(uids) if uids else 0)
                if lo > hi:
                    lo, hi = hi, lo
                for pos, uid in enumerate(uids, start=1):
                    if lo <= uid <= hi:
                        chosen.add(pos)
            else:
                lo = int(lo_s) if lo_s != "*" else count
                hi = int(hi_s) if hi_s != "*" else count
                if lo > hi:
                    lo, hi = hi, lo
                chosen.update(n for n in range(lo, hi + 1) if 1 <= n <= count)
        return sorted(chosen)

    def _uid(self, item_id: str) -> int:
        return IdGenerator.counter_of(item_id)

    def _fetch(self, tag, args, now, by_uid=False):
        if self.state != SessionState.SELECTED:
            return [f"{tag} NO FETCH requires a selected mailbox"], False
        if len(args) < 2:
            return [f"{tag} BAD FETCH expects a set and items"], False
        spec, wanted = args[0], " ".join(args[1:]).upper()
        try:
            numbers = self._parse_set(spec, len(self.selected.items), by_uid)
        except ValueError:
            return [f"{tag} BAD unparseable sequence set"], False
        lines = []
        for n in numbers:
            item_id = self.selected.items[n - 1]
            parts = []
            if by_uid or "UID" in wanted:
                parts.append(f"UID {self._uid(item_id)}")
            if "FLAGS" in wanted:
                parts.append("FLAGS (\\Seen)")
            if "RFC822.SIZE" in wanted:
                parts.append(f"RFC822.SIZE {len(self._raw(item_id))}")
            if "ENVELOPE" in wanted:
                parts.append(f"ENVELOPE {self._envelope(item_id)}")
            if "BODY.PEEK[]" in wanted or "BODY[]" in wanted:
                raw = self._raw(item_id)
                parts.append("BODY[] {%d}" % len(raw))
                lines.append(f"* {n} FETCH ({' '.join(parts)}")
                lines.append(raw.decode("utf-8", "replace") + ")")
                continue
            lines.append(f"* {n} FETCH ({' '.join(parts)})")
        command = "UID FETCH" if by_uid else "FETCH"
        return lines + [f"{tag} OK {command} completed"], False

    def _uid_fetch(self, tag, args, now):
        return self._fetch(tag, args, now, by_uid=True)

    def _raw(self, item_id: str) -> bytes:
        return self.service.item_content(item_id)

    def _envelope(self, item_id: str) -> str:
        attrs = self.service.graph.node(item_id).attrs
        sender = _address_list(str(attrs.get("sender", "")))
        recipients = _address_list(str(attrs.get("recipients", "")))
        return "(" + " ".join(
            [
                _nstring(str(attrs.get("date", ""))),
                _nstring(str(attrs.get("subject", ""))),
                sender,
                sender,
                sender,
                recipients,
                "NIL",
                "NIL",
                _nstring(str(attrs.get("in_reply_to", ""))),
                _nstring(str(attrs.get("message_id", ""))),
            ]
        ) + ")"


class _ImapHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = ImapSession(self.server.service)
        self._write(session.greeting())
        while True:
            try:
                line = self.rfile.readline()
            except (ConnectionError, OSError):
                break
            if not line:
                break
            responses, close = session.handle_line(
                line.decode("utf-8", "replace"), self.server.service.clock.now()
            )
            for response in responses:
                self._write(response)
            if close:
                break

    def _write(self, line: str) -> None:
        self.wfile.write((line + CRLF).encode("utf-8"))
        self.wfile.flush()


class ImapServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, service: DeskService, host: str = "127.0.0.1", port: int = 1143):
        super().__init__((host, port), _ImapHandler)
        self.service = service

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
