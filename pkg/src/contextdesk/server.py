"""Network front: one HTTP listener for /dav, /api and the sidebar UI,
plus the IMAP listener.  Basic auth guards /dav and /api; the event
stream endpoint speaks the server-sent-events wire format with
heartbeats, Last-Event-ID replay, and per-subscriber ordering.
"""

from __future__ import annotations

import base64
import json
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .api import ApiFacade
from .imapserver import ImapServer
from .service import Config, DeskService
from .webdav import DavFacade

SSE_HEARTBEAT_SECONDS = 15.0


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "contextdesk/0.1"

    # quiet by default; the CLI can turn logging back on
    def log_message(self, format, *args):  # noqa: A002
        if getattr(self.server, "verbose", False):
            super().log_message(format, *args)

    # -- plumbing ---------------------------------------------------------

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _authorized(self) -> bool:
        srv = self.server
        header = self.headers.get("Authorization", "")
        if not header.startswith("Basic "):
            return False
        try:
            decoded = base64.b64decode(header[6:]).decode("utf-8")
        except Exception:
            return False
        user, _, password = decoded.partition(":")
        return user == srv.config.user and password == srv.config.password

    def _deny(self) -> None:
        body = b'{"error": "UNAUTHORIZED"}'
        self.send_response(401)
        self.send_header("WWW-Authenticate", 'Basic realm="contextdesk"')
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send(self, status: int, headers: dict, body: bytes) -> None:
        self.send_response(status)
        for key, value in headers.items():
            self.send_header(key, value)
        if "Content-Length" not in headers:
            self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body and self.command != "HEAD":
            self.wfile.write(body)

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self._send(status, {"Content-Type": "application/json"}, body)

    # -- dispatch ------------------------------------------------------------

    def _dispatch(self) -> None:
        path = self.path.split("?", 1)[0]
        if path == "/api/events" and self.command == "GET":
            if not self._authorized():
                return self._deny()
            return self._serve_events()
        if path.startswith("/dav"):
            if not self._authorized():
                return self._deny()
            response = self.server.dav.handle(
                self.command, path, dict(self.headers.items()), self._body()
            )
            return self._send(response.status, dict(response.headers), response.body)
        if path.startswith("/api"):
            if not self._authorized():
                return self._deny()
            status, doc = self.server.api.handle(self.command, path, self._body())
            return self._send_json(status, doc)
        if self.command == "GET":
            return self._serve_static(path)
        self._send_json(404, {"error": "NO_ROUTE"})

    do_GET = do_POST = do_PUT = do_DELETE = do_OPTIONS = _dispatch
    do_PROPFIND = do_MKCOL = do_MOVE = _dispatch

    # -- static sidebar UI ------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        ui_dir: Path | None = self.server.ui_dir
        if ui_dir is None:
            return self._send_json(404, {"error": "NO_UI", "message": "sidebar UI not built"})
        rel = path.lstrip("/") or "index.html"
        if rel.startswith("ui/"):
            rel = rel[3:] or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            return self._send_json(404, {"error": "NOT_FOUND"})
        ctype = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
        }.get(target.suffix, "application/octet-stream")
        self._send(200, {"Content-Type": ctype}, target.read_bytes())

    # -- SSE ------------------------------------------------------------------------

    def _serve_events(self) -> None:
        last_id = self.headers.get("Last-Event-ID")
        if last_id is None and "last_event_id=" in self.path:
            last_id = self.path.split("last_event_id=", 1)[1].split("&", 1)[0]
        try:
            last_seq = int(last_id) if last_id else None
        except ValueError:
            last_seq = None
        sub = self.server.service.events.subscribe(last_seq)
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        heartbeat = getattr(self.server, "sse_heartbeat_seconds", SSE_HEARTBEAT_SECONDS)
        try:
            while not self.server.stopping.is_set():
                try:
                    event = sub.get(timeout=heartbeat)
                except queue.Empty:
                    self.wfile.write(b": hb\n\n")
                    self.wfile.flush()
                    continue
                frame = (
                    f"id: {event['seq']}\n"
                    f"event: {event['type']}\n"
                    f"data: {json.dumps({'seq': event['seq'], 'type': event['type'], 'payload': event['payload']})}\n\n"
                )
                self.wfile.write(frame.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.server.service.events.unsubscribe(sub)


class DeskHttpServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, service: DeskService, host: str = "127.0.0.1", port: int | None = None,
                 ui_dir: Path | None = None, verbose: bool = False):
        self.service = service
        self.config = service.config
        self.dav = DavFacade(service)
        self.api = ApiFacade(service)
        self.ui_dir = ui_dir
        self.verbose = verbose
        self.stopping = threading.Event()
        self.sse_heartbeat_seconds = SSE_HEARTBEAT_SECONDS
        super().__init__((host, port if port is not None else service.config.http_port), _Handler)

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        self.stopping.set()
        self.shutdown()
        self.server_close()


class DeskServer:
    """serve-mode assembly: HTTP facade + IMAP facade + tidy-up scheduler."""

    def __init__(self, service: DeskService, config: Config | None = None,
                 ui_dir: Path | None = None, verbose: bool = False):
        config = config or service.config
        self.service = service
        self.http = DeskHttpServer(service, port=config.http_port, ui_dir=ui_dir, verbose=verbose)
        self.imap = ImapServer(service, port=config.imap_port)
        self._threads: list[threading.Thread] = []
        self._scheduler_stop = threading.Event()

    @property
    def http_port(self) -> int:
        return self.http.server_address[1]

    @property
    def imap_port(self) -> int:
        return self.imap.server_address[1]

    def start(self, tidy_interval_hours: float = 24.0) -> None:
        self._threads.append(self.http.start_background())
        self._threads.append(self.imap.start_background())
        if tidy_interval_hours:
            thread = threading.Thread(
                target=self._scheduler, args=(tidy_interval_hours,), daemon=True
            )
            thread.start()
            self._threads.append(thread)

    def _scheduler(self, interval_hours: float) -> None:
        while not self._scheduler_stop.wait(interval_hours * 3600.0):
            try:
                self.service.tidy_up()
                self.service.run_coaccess()
            except Exception:  # noqa: BLE001 - the scheduler must not die
                pass

    def stop(self) -> None:
        self._scheduler_stop.set()
        self.http.stop()
        self.imap.shutdown()
        self.imap.server_close()
        self.service.close()
