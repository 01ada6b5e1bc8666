"""iCalendar and vCard serialization for the calendar/contact facades.

Deliberately small: VCALENDAR documents hold one VEVENT (UID, DTSTART,
DTEND, SUMMARY), cards are version 3.0 with FN plus optional EMAIL/TEL
lines.  Output uses CRLF line endings and folds lines over 75 octets
with a leading space, as the formats require.  The parsers exist for
ingesting fixture files and only read the same property subset back.
"""

from __future__ import annotations

from datetime import datetime, timezone

from .clock import parse_iso
from .errors import MissingAttr
from .graph import Node, NodeKind

MAX_OCTETS = 75
CRLF = "\r\n"


def fold_line(line: str) -> str:
    """Fold a content line at 75 octets, continuations indented one space.

    Splits on UTF-8 byte boundaries so multi-byte characters survive.
    """
    raw = line.encode("utf-8")
    if len(raw) <= MAX_OCTETS:
        return line
    parts = []
    start = 0
    limit = MAX_OCTETS
    while start < len(raw):
        end = min(start + limit, len(raw))
        while end > start and end < len(raw) and (raw[end] & 0xC0) == 0x80:
            end -= 1  # do not cut inside a UTF-8 sequence
        parts.append(raw[start:end].decode("utf-8"))
        start = end
        limit = MAX_OCTETS - 1  # continuation lines carry the leading space
    return (CRLF + " ").join(parts)


def unfold(text: str) -> str:
    return text.replace(CRLF + " ", "").replace("\n ", "")


def escape_text(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace(";", "\\;")
        .replace(",", "\\,")
        .replace("\n", "\\n")
    )


def unescape_text(value: str) -> str:
    out, i = [], 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append({"n": "\n", "N": "\n"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def format_ics_dt(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def parse_ics_dt(value: str) -> datetime:
    value = value.strip()
    if value.endswith("Z"):
        return datetime.strptime(value, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    return datetime.strptime(value, "%Y%m%dT%H%M%S").replace(tzinfo=timezone.utc)


def serialize_icalendar(item: Node) -> str:
    """One VEVENT per document; property order is fixed so output is stable."""
    if item.kind != NodeKind.EVENT:
        raise MissingAttr(f"{item.id} is not an EVENT")
    start = item.attrs.get("start")
    end = item.attrs.get("end")
    if not start:
        raise MissingAttr("event has no start")
    if not end:
        raise MissingAttr("event has no end")
    summary = str(item.attrs.get("summary", item.attrs.get("name", "")))
    lines = [
        "BEGIN:VCALENDAR",
        "VERSION:2.0",
        "PRODID:-//contextdesk//calendar//EN",
        "BEGIN:VEVENT",
        f"UID:{item.id}",
        f"DTSTART:{format_ics_dt(parse_iso(str(start)))}",
        f"DTEND:{format_ics_dt(parse_iso(str(end)))}",
        f"SUMMARY:{escape_text(summary)}",
        "END:VEVENT",
        "END:VCALENDAR",
    ]
    return CRLF.join(fold_line(line) for line in lines) + CRLF


def serialize_vcard(item: Node) -> str:
    if item.kind != NodeKind.CONTACT:
        raise MissingAttr(f"{item.id} is not a CONTACT")
    fn = str(item.attrs.get("fn", item.attrs.get("name", ""))).strip()
    if not fn:
        raise MissingAttr("contact has no name")
    lines = ["BEGIN:VCARD", "VERSION:3.0", f"FN:{escape_text(fn)}"]
    # multi-valued fields are stored as indexed attrs: email_1, email_2, ...
    for key in ("email", "tel"):
        indexed = sorted(
            (attr for attr in item.attrs if attr == key or attr.startswith(f"{key}_")),
            key=lambda a: (len(a), a),
        )
        for attr in indexed:
            lines.append(f"{key.upper()}:{escape_text(str(item.attrs[attr]))}")
    lines.append("END:VCARD")
    return CRLF.join(fold_line(line) for line in lines) + CRLF


def _content_lines(text: str) -> list[tuple[str, str]]:
    """(NAME, value) pairs, params stripped, unfolding applied."""
    out = []
    for line in unfold(text).replace("\r\n", "\n").split("\n"):
        line = line.strip("\r")
        if not line or ":" not in line:
            continue
        head, value = line.split(":", 1)
        name = head.split(";", 1)[0].upper()
        out.append((name, value))
    return out


def parse_icalendar(text: str) -> list[dict]:
    """Extract the VEVENT subset we store: uid, start, end, summary."""
    events, current = [], None
    for name, value in _content_lines(text):
        if name == "BEGIN" and value.upper() == "VEVENT":
            current = {}
        elif name == "END" and value.upper() == "VEVENT":
            if current is not None:
                events.append(current)
            current = None
        elif current is not None:
            if name == "UID":
                current["uid"] = value.strip()
            elif name == "DTSTART":
                current["start"] = parse_ics_dt(value)
            elif name == "DTEND":
                current["end"] = parse_ics_dt(value)
            elif name == "SUMMARY":
                current["summary"] = unescape_text(value)
    return events


def parse_vcard(text: str) -> list[dict]:
    cards, current = [], None
    for name, value in _content_lines(text):
        if name == "BEGIN" and value.upper() == "VCARD":
            current = {"emails": [], "tels": []}
        elif name == "END" and value.upper() == "VCARD":
            if current is not None:
                cards.append(current)
            current = None
        elif current is not None:
            if name == "FN":
                current["fn"] = unescape_text(value)
            elif name == "EMAIL":
                current["emails"].append(value.strip())
            elif name == "TEL":
                current["tels"].append(value.strip())
    return cards
