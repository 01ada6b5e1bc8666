"""Corpus ingestion: directories, mbox files, calendars, address books,
bookmark lists.  Imports are uniform (strength 1.0, origin PROTOCOL);
differentiation comes from later accesses, not from import heuristics.
"""

from __future__ import annotations

import mailbox
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .clock import iso
from .contexts import Origin
from .graph import NodeKind
from .service import DeskService
from .vformats import parse_icalendar, parse_vcard


@dataclass
class IngestReport:
    items: int = 0
    memberships: int = 0

    def __str__(self) -> str:
        return f"{self.items} items, {self.memberships} memberships"


def resolve_context(service: DeskService, name: str, now: datetime) -> str:
    """Find an ACTIVE context by name, creating it when absent."""
    for node in service.contexts.all_contexts():
        if node.attrs.get("name") == name and node.attrs.get("state", "ACTIVE") == "ACTIVE":
            return node.id
    return service.create_context(name, now=now)


def ingest_dir(service: DeskService, directory: Path, ctx_id: str, now: datetime) -> IngestReport:
    report = IngestReport()
    for path in sorted(p for p in Path(directory).rglob("*") if p.is_file()):
        item = service.create_item(NodeKind.FILE, path.name, content=path.read_bytes(), now=now)
        service.add_item(ctx_id, item, 1.0, Origin.PROTOCOL, now=now)
        report.items += 1
        report.memberships += 1
    return report


def ingest_mbox(service: DeskService, path: Path, ctx_id: str, now: datetime) -> IngestReport:
    report = IngestReport()
    box = mailbox.mbox(str(path))
    try:
        for key in box.keys():
            raw = box.get_bytes(key)
            service.ingest_mail(raw, ctx_id=ctx_id, now=now)
            report.items += 1
            report.memberships += 1
    finally:
        box.close()
    return report


def ingest_ics(service: DeskService, path: Path, ctx_id: str, now: datetime) -> IngestReport:
    report = IngestReport()
    for event in parse_icalendar(Path(path).read_text(encoding="utf-8")):
        if "start" not in event or "end" not in event:
            continue
        attrs = {
            "start": iso(event["start"]),
            "end": iso(event["end"]),
            "summary": event.get("summary", ""),
        }
        if event.get("uid"):
            attrs["uid"] = event["uid"]
        item = service.create_item(NodeKind.EVENT, event.get("summary") or event.get("uid", "event"),
                                   attrs=attrs, now=now)
        service.add_item(ctx_id, item, 1.0, Origin.PROTOCOL, now=now)
        report.items += 1
        report.memberships += 1
    return report


def ingest_vcf(service: DeskService, path: Path, ctx_id: str, now: datetime) -> IngestReport:
    report = IngestReport()
    for card in parse_vcard(Path(path).read_text(encoding="utf-8")):
        fn = card.get("fn") or "contact"
        attrs: dict = {"fn": fn}
        for i, address in enumerate(card.get("emails", []), start=1):
            attrs[f"email_{i}"] = address
        for i, number in enumerate(card.get("tels", []), start=1):
            attrs[f"tel_{i}"] = number
        item = service.create_item(NodeKind.CONTACT, fn, attrs=attrs, now=now)
        service.add_item(ctx_id, item, 1.0, Origin.PROTOCOL, now=now)
        report.items += 1
        report.memberships += 1
    return report


def ingest_bookmarks(service: DeskService, path: Path, ctx_id: str, now: datetime) -> IngestReport:
    """One URL per line, optional title after a tab."""
    report = IngestReport()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        url, _, title = line.partition("\t")
        name = title.strip() or url
        item = service.create_item(NodeKind.BOOKMARK, name, attrs={"url": url}, now=now)
        service.add_item(ctx_id, item, 1.0, Origin.PROTOCOL, now=now)
        report.items += 1
        report.memberships += 1
    return report
