"""Small helpers shared by the JSON-over-HTTP services in this package."""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

log = logging.getLogger(__name__)


class JsonHandler(BaseHTTPRequestHandler):
    """Request handler with JSON body/response plumbing."""

    protocol_version = "HTTP/1.1"
    # headers and body go out as separate writes; without TCP_NODELAY a
    # keep-alive client stalls ~40ms per request on Nagle + delayed ACK
    disable_nagle_algorithm = True

    def log_message(self, format: str, *args: Any) -> None:  # noqa: A002
        log.debug("%s %s", self.address_string(), format % args)

    def read_json(self) -> Any:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return None
        return json.loads(raw.decode("utf-8"))

    def send_json(self, status: int, document: Any = None) -> None:
        body = b"" if document is None else json.dumps(document).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)


class HttpService:
    """Owns a threaded HTTP server bound to an ephemeral or fixed port."""

    def __init__(self, handler_class: type, host: str = "127.0.0.1",
                 port: int = 0, **context: Any):
        self._server = ThreadingHTTPServer((host, port), handler_class)
        self._server.daemon_threads = True
        for name, value in context.items():
            setattr(self._server, name, value)
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "HttpService":
        if self._thread is None:
            self._thread = threading.Thread(
                target=self._server.serve_forever,
                name=f"http-{self.port}", daemon=True)
            self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join(timeout=10)
            self._thread = None
        self._server.server_close()

    def __enter__(self) -> "HttpService":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
