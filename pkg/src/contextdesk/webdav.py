"""WebDAV facade: mount the knowledge graph as folders.

``/dav/current`` is the live mount of the current context;
``/dav/contexts/<name>`` addresses any non-retracted context flat (a
sub-context is reachable both nested and at top level).  A context
folder lists, in this order: sub-context folders and file/note leaves
(exactly the FILES view), bookmark leaves rendered as ``*.url`` files,
plus ``calendar/`` and ``contacts/`` collections when the matching view
is non-empty.  Every listing is derived from the same view
materialization the rest of the system uses, so facade and view can
never disagree.

Mutations map onto graph operations: PUT files into the folder's
context, MKCOL spawns a sub-context, DELETE drops the membership (never
the item's other memberships), MOVE re-associates.
"""

from __future__ import annotations

import email.utils
from dataclasses import dataclass, field
from datetime import datetime
from urllib.parse import quote, unquote, urlsplit
from xml.etree import ElementTree as ET

from .contexts import CtxState, Origin
from .errors import DeskError
from .graph import NodeKind
from .service import DeskService
from .views import ViewKind

DAV_NS = "DAV:"
ET.register_namespace("D", DAV_NS)


@dataclass
class DavResponse:
    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""


# resolved resource kinds
ROOT = "root"
CONTEXTS_ROOT = "contexts-root"
CTX = "ctx"
CAL_DIR = "calendar-dir"
CARD_DIR = "contacts-dir"
FILE_LEAF = "file-leaf"
URL_LEAF = "url-leaf"
ICS_LEAF = "ics-leaf"
VCF_LEAF = "vcf-leaf"

COLLECTIONS = (ROOT, CONTEXTS_ROOT, CTX, CAL_DIR, CARD_DIR)


@dataclass
class Resource:
    kind: str
    ctx: str | None = None
    item: str | None = None
    name: str = ""


def _suffix(name: str, ext: str) -> str:
    return name if name.lower().endswith(ext) else name + ext


class DavFacade:
    def __init__(self, service: DeskService):
        self.service = service

    # -- resolution -------------------------------------------------------

    def _context_root_entries(self) -> list[tuple[str, str]]:
        """(display name, ctx id) for every addressable context, deduped."""
        contexts = self.service.contexts.all_contexts()
        counts: dict[str, int] = {}
        for node in contexts:
            counts[str(node.attrs.get("name"))] = counts.get(str(node.attrs.get("name")), 0) + 1
        out = []
        for node in contexts:
            name = str(node.attrs.get("name"))
            if counts[name] > 1:
                name = f"{name}~{node.id[-6:]}"
            out.append((name, node.id))
        return sorted(out)

    def _ctx_children(self, ctx_id: str, now: datetime) -> list[tuple[str, Resource]]:
        svc = self.service
        entries: list[tuple[str, Resource]] = []
        files = svc.materialize(ctx_id, ViewKind.FILES, now=now)
        for child in files.root.children or []:
            if child.is_collection:
                entries.append((child.name, Resource(CTX, ctx=child.node_id, name=child.name)))
            else:
                entries.append((child.name, Resource(FILE_LEAF, ctx=ctx_id, item=child.node_id, name=child.name)))
        links = svc.materialize(ctx_id, ViewKind.LINKS, now=now)
        for child in links.root.children or []:
            name = _suffix(child.name, ".url")
            entries.append((name, Resource(URL_LEAF, ctx=ctx_id, item=child.node_id, name=name)))
        if (svc.materialize(ctx_id, ViewKind.CALENDAR, now=now).root.children or []):
            entries.append(("calendar", Resource(CAL_DIR, ctx=ctx_id, name="calendar")))
        if (svc.materialize(ctx_id, ViewKind.CONTACTS, now=now).root.children or []):
            entries.append(("contacts", Resource(CARD_DIR, ctx=ctx_id, name="contacts")))
        return entries

    def _dir_children(self, res: Resource, now: datetime) -> list[tuple[str, Resource]]:
        svc = self.service
        if res.kind == ROOT:
            out = []
            if svc.contexts.current_context() is not None:
                out.append(("current", Resource(CTX, ctx=svc.contexts.current_context(), name="current")))
            out.append(("contexts", Resource(CONTEXTS_ROOT, name="contexts")))
            return out
        if res.kind == CONTEXTS_ROOT:
            return [(name, Resource(CTX, ctx=cid, name=name)) for name, cid in self._context_root_entries()]
        if res.kind == CTX:
            return self._ctx_children(res.ctx, now)
        if res.kind == CAL_DIR:
            tree = svc.materialize(res.ctx, ViewKind.CALENDAR, now=now)
            return [
                (_suffix(c.name, ".ics"), Resource(ICS_LEAF, ctx=res.ctx, item=c.node_id, name=_suffix(c.name, ".ics")))
                for c in tree.root.children or []
            ]
        if res.kind == CARD_DIR:
            tree = svc.materialize(res.ctx, ViewKind.CONTACTS, now=now)
            return [
                (_suffix(c.name, ".vcf"), Resource(VCF_LEAF, ctx=res.ctx, item=c.node_id, name=_suffix(c.name, ".vcf")))
                for c in tree.root.children or []
            ]
        return []

    def resolve(self, path: str, now: datetime) -> Resource | None:
        segments = [unquote(s) for s in path.strip("/").split("/") if s]
        if not segments or segments[0] != "dav":
            return None
        cursor = Resource(ROOT, name="dav")
        for segment in segments[1:]:
            if cursor.kind not in COLLECTIONS:
                return None
            match = None
            for name, child in self._dir_children(cursor, now):
                if name == segment:
                    match = child
                    break
            if match is None:
                return None
            cursor = match
        return cursor

    def parent_of(self, path: str, now: datetime) -> tuple[Resource | None, str]:
        trimmed = path.strip("/")
        if "/" not in trimmed:
            return None, ""
        parent_path, _, basename = trimmed.rpartition("/")
        return self.resolve("/" + parent_path, now), unquote(basename)

    # -- request handling ------------------------------------------------------

    def handle(self, method: str, path: str, headers: dict[str, str], body: bytes,
               now: datetime | None = None) -> DavResponse:
        now = now or self.service.clock.now()
        headers = {k.lower(): v for k, v in headers.items()}
        try:
            if method == "OPTIONS":
                return DavResponse(200, {"Allow": "OPTIONS, PROPFIND, GET, PUT, MKCOL, DELETE, MOVE", "DAV": "1"})
            if method == "PROPFIND":
                return self._propfind(path, headers, now)
            if method == "GET":
                return self._get(path, now)
            if method == "PUT":
                return self._put(path, body, now)
            if method == "MKCOL":
                return self._mkcol(path, now)
            if method == "DELETE":
                return self._delete(path, now)
            if method == "MOVE":
                return self._move(path, headers, now)
            return DavResponse(405, {"Allow": "OPTIONS, PROPFIND, GET, PUT, MKCOL, DELETE, MOVE"})
        except DeskError as exc:
            status = {"UNKNOWN_ID": 404, "CTX_RETRACTED": 404}.get(exc.code, 409)
            return DavResponse(status, {}, exc.message.encode())

    # -- PROPFIND ---------------------------------------------------------------

    def _propfind(self, path: str, headers: dict, now: datetime) -> DavResponse:
        depth = headers.get("depth", "1").strip()
        if depth not in ("0", "1"):
            return DavResponse(400, {}, b"depth must be 0 or 1")
        resource = self.resolve(path, now)
        if resource is None:
            return DavResponse(404)
        base = "/" + path.strip("/")
        multi = ET.Element(f"{{{DAV_NS}}}multistatus")
        self._response_element(multi, base, resource, now)
        if depth == "1" and resource.kind in COLLECTIONS:
            for name, child in self._dir_children(resource, now):
                self._response_element(multi, f"{base}/{name}", child, now)
        xml = ET.tostring(multi, encoding="utf-8", xml_declaration=True)
        return DavResponse(207, {"Content-Type": 'application/xml; charset="utf-8"'}, xml)

    def _response_element(self, multi: ET.Element, href_path: str, res: Resource, now: datetime) -> None:
        response = ET.SubElement(multi, f"{{{DAV_NS}}}response")
        is_dir = res.kind in COLLECTIONS
        href = quote(href_path) + ("/" if is_dir else "")
        ET.SubElement(response, f"{{{DAV_NS}}}href").text = href
        propstat = ET.SubElement(response, f"{{{DAV_NS}}}propstat")
        prop = ET.SubElement(propstat, f"{{{DAV_NS}}}prop")
        display = res.name or href_path.rsplit("/", 1)[-1]
        ET.SubElement(prop, f"{{{DAV_NS}}}displayname").text = display
        rtype = ET.SubElement(prop, f"{{{DAV_NS}}}resourcetype")
        if is_dir:
            ET.SubElement(rtype, f"{{{DAV_NS}}}collection")
        else:
            length, modified = self._leaf_meta(res, now)
            ET.SubElement(prop, f"{{{DAV_NS}}}getcontentlength").text = str(length)
            ET.SubElement(prop, f"{{{DAV_NS}}}getlastmodified").text = modified
        ET.SubElement(propstat, f"{{{DAV_NS}}}status").text = "HTTP/1.1 200 OK"

    def _leaf_meta(self, res: Resource, now: datetime) -> tuple[int, str]:
        body = self._leaf_body(res, record_access=False)
        item = self.service.graph.node(res.item)
        stamp = item.attrs.get("created_at")
        if stamp:
            from .clock import parse_iso

            modified = email.utils.format_datetime(parse_iso(str(stamp)), usegmt=True)
        else:
            modified = email.utils.format_datetime(now, usegmt=True)
        return len(body), modified

    # -- GET ------------------------------------------------------------------------

    def _leaf_body(self, res: Resource, record_access: bool = True) -> bytes:
        from .vformats import serialize_icalendar, serialize_vcard

        item = self.service.graph.node(res.item)
        if res.kind == URL_LEAF:
            url = str(item.attrs.get("url", ""))
            body = f"[InternetShortcut]\r\nURL={url}\r\n".encode()
        elif res.kind == ICS_LEAF:
            body = serialize_icalendar(item).encode()
        elif res.kind == VCF_LEAF:
            body = serialize_vcard(item).encode()
        else:
            body = self.service.item_content(res.item)
        if record_access:
            self.service.record_open(res.item)
        return body

    def _get(self, path: str, now: datetime) -> DavResponse:
        resource = self.resolve(path, now)
        if resource is None:
            return DavResponse(404)
        if resource.kind in COLLECTIONS:
            return DavResponse(405, {"Allow": "OPTIONS, PROPFIND"})
        body = self._leaf_body(resource)
        ctype = {
            URL_LEAF: "text/plain; charset=utf-8",
            ICS_LEAF: "text/calendar; charset=utf-8",
            VCF_LEAF: "text/vcard; charset=utf-8",
        }.get(resource.kind, "application/octet-stream")
        return DavResponse(200, {"Content-Type": ctype, "Content-Length": str(len(body))}, body)

    # -- mutations ---------------------------------------------------------------------

    def _put(self, path: str, body: bytes, now: datetime) -> DavResponse:
        existing = self.resolve(path, now)
        if existing is not None and existing.kind in COLLECTIONS:
            return DavResponse(405, {}, b"cannot PUT on a collection")
        parent, basename = self.parent_of(path, now)
        if parent is None or parent.kind not in (CTX,):
            if parent is not None and parent.kind in (CAL_DIR, CARD_DIR):
                return DavResponse(405, {}, b"calendar/contact collections are read-only")
            return DavResponse(404)
        svc = self.service
        if existing is not None and existing.kind == FILE_LEAF:
            ref = svc.content.put(body)
            svc.graph.set_node_attrs(existing.item, {"content_ref": ref, "size": len(body)}, now)
            svc.add_item(parent.ctx, existing.item, 1.0, Origin.PROTOCOL, now=now)
            return DavResponse(204)
        if existing is not None:
            return DavResponse(405, {}, b"resource exists and is not a file")
        item = svc.create_item(NodeKind.FILE, basename, content=body, now=now)
        svc.add_item(parent.ctx, item, 1.0, Origin.PROTOCOL, now=now)
        return DavResponse(201)

    def _mkcol(self, path: str, now: datetime) -> DavResponse:
        if self.resolve(path, now) is not None:
            return DavResponse(405, {}, b"resource exists")
        parent, basename = self.parent_of(path, now)
        if parent is None:
            return DavResponse(409, {}, b"missing parent collection")
        if parent.kind == CONTEXTS_ROOT:
            self.service.create_context(basename, None, now)
            return DavResponse(201)
        if parent.kind == CTX:
            self.service.create_context(basename, parent.ctx, now)
            return DavResponse(201)
        return DavResponse(409, {}, b"parent cannot hold collections")

    def _delete(self, path: str, now: datetime) -> DavResponse:
        resource = self.resolve(path, now)
        if resource is None:
            return DavResponse(404)
        if resource.kind in COLLECTIONS:
            return DavResponse(405, {}, b"collections are not deletable via the facade")
        self.service.remove_item(resource.ctx, resource.item, now)
        return DavResponse(204)

    def _move(self, path: str, headers: dict, now: datetime) -> DavResponse:
        resource = self.resolve(path, now)
        if resource is None:
            return DavResponse(404)
        if resource.kind in COLLECTIONS:
            return DavResponse(405, {}, b"collections cannot be moved")
        destination = headers.get("destination", "")
        if not destination:
            return DavResponse(400, {}, b"missing Destination header")
        dest_path = unquote(urlsplit(destination).path)
        dest_parent, dest_name = self.parent_of(dest_path, now)
        if dest_parent is None or dest_parent.kind != CTX:
            return DavResponse(409, {}, b"destination collection does not exist")
        svc = self.service
        membership = svc.contexts.membership(resource.ctx, resource.item)
        if membership is None:
            return DavResponse(404)
        overwrote = self.resolve(dest_path, now) is not None
        if dest_parent.ctx != resource.ctx:
            svc.contexts.move_membership(membership, dest_parent.ctx, now)
            svc.events.publish(
                "ITEM_ADDED",
                {"ctx": dest_parent.ctx, "item": resource.item, "moved_from": resource.ctx,
                 "graph_seq": svc.graph.seq},
            )
        stem = dest_name
        for ext in (".url",):
            if resource.kind == URL_LEAF and stem.lower().endswith(ext):
                stem = stem[: -len(ext)]
        if stem and stem != str(svc.graph.node(resource.item).attrs.get("name")):
            svc.graph.set_node_attrs(resource.item, {"name": stem}, now)
        return DavResponse(204 if overwrote else 201)
