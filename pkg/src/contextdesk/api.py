"""Sidebar control plane: JSON routes mapping 1:1 onto service operations.

Every mutating route returns the operation's own result; error codes map
to HTTP statuses through one table (errors.http_status).  The event
stream (SSE) lives in the HTTP server, which owns the sockets; this
module stays transport-free and therefore directly testable.
"""

from __future__ import annotations

import base64
import json
import re
from datetime import datetime

from .clock import parse_iso
from .errors import DeskError, http_status
from .graph import NodeKind
from .service import DeskService


class ApiFacade:
    def __init__(self, service: DeskService):
        self.service = service
        self.routes = [
            ("GET", re.compile(r"^/api/contexts$"), self.get_contexts),
            ("POST", re.compile(r"^/api/contexts$"), self.post_context),
            ("GET", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/items$"), self.get_items),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/current$"), self.post_current),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/merge-into/(?P<dst>[^/]+)$"), self.post_merge),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/split$"), self.post_split),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/retract$"), self.post_retract),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/items$"), self.post_item),
            ("DELETE", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/items/(?P<item>[^/]+)$"), self.delete_item),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/pin/(?P<item>[^/]+)$"), self.post_pin),
            ("POST", re.compile(r"^/api/contexts/(?P<ctx>[^/]+)/touch/(?P<item>[^/]+)$"), self.post_touch),
            ("GET", re.compile(r"^/api/proposals$"), self.get_proposals),
            ("POST", re.compile(r"^/api/proposals/(?P<pid>[^/]+)/accept$"), self.post_accept),
            ("POST", re.compile(r"^/api/proposals/(?P<pid>[^/]+)/reject$"), self.post_reject),
            ("GET", re.compile(r"^/api/forgetting/preview$"), self.get_preview),
            ("POST", re.compile(r"^/api/tidyup$"), self.post_tidyup),
            ("GET", re.compile(r"^/api/unfiled$"), self.get_unfiled),
            ("GET", re.compile(r"^/api/policy$"), self.get_policy),
        ]

    def handle(self, method: str, path: str, body: bytes, now: datetime | None = None) -> tuple[int, dict]:
        """Dispatch one request; (status, json-serializable body)."""
        doc = {}
        if body:
            try:
                doc = json.loads(body.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                return 400, {"error": "BAD_JSON", "message": "body is not valid JSON"}
        if not isinstance(doc, dict):
            return 400, {"error": "BAD_JSON", "message": "body must be a JSON object"}
        for route_method, pattern, handler in self.routes:
            if route_method != method:
                continue
            match = pattern.match(path)
            if match:
                try:
                    return handler(doc, now=now, **match.groupdict())
                except DeskError as exc:
                    return http_status(exc), exc.to_dict()
        return 404, {"error": "NO_ROUTE", "message": f"{method} {path}"}

    # -- reads -------------------------------------------------------------

    def get_contexts(self, doc, now=None):  # noqa: ARG002
        return 200, self.service.context_tree(now=now)

    def get_items(self, doc, ctx, now=None):  # noqa: ARG002
        return 200, {"items": self.service.context_items(ctx, now=now)}

    def get_proposals(self, doc, now=None):  # noqa: ARG002
        return 200, {"proposals": [p.to_dict() for p in self.service.inference.pending()]}

    def get_preview(self, doc, now=None):  # noqa: ARG002
        return 200, self.service.preview_tidy_up(now=now).to_dict()

    def get_unfiled(self, doc, now=None):  # noqa: ARG002
        return 200, {"unfiled": self.service.contexts.unfiled_items()}

    def get_policy(self, doc, now=None):  # noqa: ARG002
        return 200, self.service.config.policy.to_dict()

    # -- mutations --------------------------------------------------------------

    def post_context(self, doc, now=None):
        ctx = self.service.create_context(str(doc.get("name", "")), doc.get("parent"), now=now)
        return 201, {"id": ctx}

    def post_current(self, doc, ctx, now=None):  # noqa: ARG002
        return 200, self.service.set_current(ctx, now=now)

    def post_merge(self, doc, ctx, dst, now=None):  # noqa: ARG002
        return 200, self.service.merge_contexts(ctx, dst, now=now)

    def post_split(self, doc, ctx, now=None):
        return 200, self.service.split_context(
            ctx, str(doc.get("name_a", "")), str(doc.get("name_b", "")),
            dict(doc.get("assignment", {})), now=now,
        )

    def post_retract(self, doc, ctx, now=None):  # noqa: ARG002
        return 200, self.service.retract_context(ctx, now=now)

    def post_item(self, doc, ctx, now=None):
        strength = float(doc.get("strength", 1.0))
        pinned = bool(doc.get("pinned", False))
        if "item_id" in doc:
            item = doc["item_id"]
        elif "upload" in doc:
            up = doc["upload"]
            kind = NodeKind(up.get("kind", "FILE"))
            content = None
            if "content_b64" in up:
                content = base64.b64decode(up["content_b64"])
            elif "text" in up:
                content = str(up["text"]).encode("utf-8")
            item = self.service.create_item(kind, str(up.get("name", "item")),
                                            attrs=up.get("attrs"), content=content, now=now)
        else:
            return 400, {"error": "BAD_REQUEST", "message": "need item_id or upload"}
        m = self.service.add_item(ctx, item, strength, pinned=pinned, now=now)
        return 201, {"membership": m.to_dict()}

    def delete_item(self, doc, ctx, item, now=None):  # noqa: ARG002
        removed = self.service.remove_item(ctx, item, now=now)
        return (200, {"removed": removed}) if removed else (404, {"error": "UNKNOWN_MEMBERSHIP"})

    def post_pin(self, doc, ctx, item, now=None):
        pinned = doc.get("pinned")
        m = self.service.pin_item(ctx, item, pinned if pinned is None else bool(pinned), now=now)
        return 200, {"membership": m.to_dict()}

    def post_touch(self, doc, ctx, item, now=None):  # noqa: ARG002
        return 200, {"membership": self.service.touch(item, ctx, now=now).to_dict()}

    def post_accept(self, doc, pid, now=None):  # noqa: ARG002
        return 200, {"proposal": self.service.accept_proposal(pid, now=now).to_dict()}

    def post_reject(self, doc, pid, now=None):  # noqa: ARG002
        return 200, {"proposal": self.service.reject_proposal(pid).to_dict()}

    def post_tidyup(self, doc, now=None):
        if now is None and "now" in doc:
            now = parse_iso(str(doc["now"]))
        return 200, self.service.tidy_up(now=now).to_dict()
