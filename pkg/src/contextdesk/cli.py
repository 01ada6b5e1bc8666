"""Operator CLI: run the daemon, ingest corpora, drive scripted scenarios,
trigger and inspect tidy-ups.

Exit codes: 0 ok, 1 failed assertion or validation, 2 usage, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .clock import VirtualClock, parse_iso
from .errors import DeskError
from .ingest import (
    ingest_bookmarks,
    ingest_dir,
    ingest_ics,
    ingest_mbox,
    ingest_vcf,
    resolve_context,
)
from .scenario import AssertionFailed, ScenarioError, ScenarioRunner, load_script
from .service import Config, DeskService

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contextdesk")
    parser.add_argument("--store", default="./deskstore", help="store directory (default ./deskstore)")
    parser.add_argument("--config", help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run HTTP (DAV + API) and IMAP listeners")
    serve.add_argument("--ui", help="directory with the built sidebar UI")
    serve.add_argument("--verbose", action="store_true")

    ingest = sub.add_parser("ingest", help="import a corpus into one context")
    ingest.add_argument("--context", required=True, help="target context name (created if absent)")
    ingest.add_argument("--dir", help="directory of files")
    ingest.add_argument("--mbox", help="mbox mail file")
    ingest.add_argument("--ics", help="iCalendar file")
    ingest.add_argument("--vcf", help="vCard file")
    ingest.add_argument("--bookmarks", help="bookmark list (URL per line, optional tab + title)")

    scenario = sub.add_parser("scenario", help="run a scripted scenario on a virtual clock")
    scenario.add_argument("file")
    scenario.add_argument("--persist", action="store_true", help="run against --store instead of memory")

    tidy = sub.add_parser("tidyup", help="run one tidy-up pass and print the report")
    tidy.add_argument("--now", help="virtual timestamp (RFC 3339)")
    tidy.add_argument("--dry-run", action="store_true")

    inspect = sub.add_parser("inspect", help="print deterministic listings")
    inspect_sub = inspect.add_subparsers(dest="what", required=True)
    inspect_sub.add_parser("contexts")
    ctx = inspect_sub.add_parser("ctx")
    ctx.add_argument("id")
    inspect_sub.add_parser("unfiled")
    inspect_sub.add_parser("log")

    sub.add_parser("snapshot", help="write a snapshot now")
    return parser


def _open_service(args, clock=None) -> DeskService:
    config = Config.load(args.config) if args.config else Config()
    return DeskService(Path(args.store), config=config, clock=clock)


def cmd_serve(args) -> int:
    from .server import DeskServer

    service = _open_service(args)
    ui_dir = Path(args.ui) if args.ui else None
    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    server = DeskServer(service, ui_dir=ui_dir, verbose=args.verbose)
    server.start()
    print(f"http on :{server.http_port} (dav + api), imap on :{server.imap_port}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def cmd_ingest(args) -> int:
    service = _open_service(args)
    now = service.clock.now()
    try:
        ctx = resolve_context(service, args.context, now)
        totals = None
        for option, fn in (
            ("dir", ingest_dir),
            ("mbox", ingest_mbox),
            ("ics", ingest_ics),
            ("vcf", ingest_vcf),
            ("bookmarks", ingest_bookmarks),
        ):
            value = getattr(args, option)
            if value:
                report = fn(service, Path(value), ctx, now)
                if totals is None:
                    totals = report
                else:
                    totals.items += report.items
                    totals.memberships += report.memberships
        if totals is None:
            print("nothing to ingest (pass --dir/--mbox/--ics/--vcf/--bookmarks)", file=sys.stderr)
            return EXIT_USAGE
        print(totals)
        return EXIT_OK
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        service.close()


def cmd_scenario(args) -> int:
    clock = VirtualClock()
    try:
        steps = load_script(args.file)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as exc:
        print(f"bad script: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.persist:
        service = _open_service(args, clock=clock)
    else:
        service = DeskService(None, clock=clock)
    try:
        runner = ScenarioRunner(service)
        result = runner.run(steps)
    except AssertionFailed as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        service.close()
    print(f"ok: {result.steps} steps, {result.asserts_passed} assertions")
    for line in result.log:
        print(line)
    return EXIT_OK


def cmd_tidyup(args) -> int:
    service = _open_service(args)
    try:
        now = parse_iso(args.now) if args.now else None
        report = service.preview_tidy_up(now=now) if args.dry_run else service.tidy_up(now=now)
        print(json.dumps(report.to_dict(), indent=2))
        return EXIT_OK
    finally:
        service.close()


def cmd_inspect(args) -> int:
    service = _open_service(args)
    try:
        if args.what == "contexts":
            print("id\tname\tstate\tparent\tmembers\tcurrent")
            for node in service.contexts.all_contexts(include_retracted=True):
                print(
                    "\t".join(
                        [
                            node.id,
                            str(node.attrs.get("name")),
                            str(node.attrs.get("state", "ACTIVE")),
                            service.contexts.parent_of(node.id) or "-",
                            str(len(service.contexts.memberships_of(node.id))),
                            "*" if node.id == service.contexts.current_context() else "-",
                        ]
                    )
                )
        elif args.what == "ctx":
            print("item\tname\tkind\tstrength\tmeasure\tpinned")
            for m in service.contexts.memberships_of(args.id):
                item = service.graph.node(m.item)
                print(
                    f"{m.item}\t{item.attrs.get('name')}\t{item.kind.value}"
                    f"\t{m.strength}\t{m.measure}\t{'*' if m.pinned else '-'}"
                )
        elif args.what == "unfiled":
            print("item\tname\tkind")
            for item_id in service.contexts.unfiled_items():
                node = service.graph.node(item_id)
                print(f"{item_id}\t{node.attrs.get('name')}\t{node.kind.value}")
        elif args.what == "log":
            from .graph import read_all_records

            for record in read_all_records(Path(args.store) / "store"):
                print(record.to_json())
        return EXIT_OK
    except DeskError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        service.close()


def cmd_snapshot(args) -> int:
    service = _open_service(args)
    try:
        path = service.snapshot_now()
        print(path or "in-memory store, nothing to snapshot")
        return EXIT_OK
    finally:
        service.close()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "ingest": cmd_ingest,
        "scenario": cmd_scenario,
        "tidyup": cmd_tidyup,
        "inspect": cmd_inspect,
        "snapshot": cmd_snapshot,
    }
    try:
        return handlers[args.command](args)
    except DeskError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
