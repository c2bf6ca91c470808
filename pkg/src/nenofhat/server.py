"""Minimal HTTP triple-store endpoint.

POST /         body = one query/update document in the textual surface;
               response = TSV bindings (SELECT), a truth token (ASK), or an
               affected count (updates).
POST /persist  write the graph to the configured N-Triples file.

Updates are serialized under one lock (the store's single-writer contract).
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .sparql import QueryParseError
from .store import LocalStore, render_response


class StoreServer:
    def __init__(self, store: LocalStore, host: str = "127.0.0.1", port: int = 0):
        self.store = store
        self.lock = threading.Lock()
        handler = self._make_handler()
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    def _make_handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # noqa: N802 - stdlib name
                pass

            def _reply(self, status: int, body: str) -> None:
                payload = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "text/plain; charset=utf-8")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_POST(self):  # noqa: N802 - stdlib name
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length).decode("utf-8")
                if self.path == "/persist":
                    try:
                        with server.lock:
                            server.store.save()
                    except Exception as exc:  # pragma: no cover - io failure
                        self._reply(500, f"persist failed: {exc}")
                        return
                    self._reply(200, "ok")
                    return
                try:
                    with server.lock:
                        result = server.store.execute_text(body)
                except QueryParseError as exc:
                    self._reply(400, f"parse error: {exc}")
                    return
                except ValueError as exc:
                    self._reply(400, str(exc))
                    return
                self._reply(200, render_response(result))

        return Handler

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        if self.store.path is not None:
            self.store.save()

    def serve_forever(self) -> None:
        try:
            self.httpd.serve_forever()
        finally:
            self.httpd.server_close()
            if self.store.path is not None:
                self.store.save()
