"""Simulator server: schedule REST endpoint plus the position TCP stream.

Both faces read the same script and the same clock; the clock is the only
thing that advances.
"""
from __future__ import annotations

import logging
import socketserver
import threading
from typing import Any
from urllib.parse import urlparse

from ..webutil import HttpService, JsonHandler
from . import feedgen
from .clock import SimClock
from .scenario import ScenarioScript

log = logging.getLogger(__name__)

TOKEN_HEADER = "X-Api-Token"


class ScheduleHandler(JsonHandler):
    def do_GET(self) -> None:
        server = self.server
        path = urlparse(self.path).path
        if path == "/health":
            self.send_json(200, {"status": "ok"})
            return
        if path != "/chroma/flights":
            self.send_json(404, {"error": f"no route GET {path}"})
            return
        token = server.token  # type: ignore[attr-defined]
        if token and self.headers.get(TOKEN_HEADER) != token:
            self.send_json(401, {"error": "bad or missing token"})
            return
        document = feedgen.serve_schedule(
            server.script, server.clock.now())  # type: ignore[attr-defined]
        self.send_json(200, document)


class _PositionStreamServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class _PositionStreamHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: _PositionStreamServer = self.server  # type: ignore[assignment]
        clock: SimClock = server.clock  # type: ignore[attr-defined]
        script: ScenarioScript = server.script  # type: ignore[attr-defined]
        stop: threading.Event = server.stop_event  # type: ignore[attr-defined]
        tick: float = server.tick_seconds  # type: ignore[attr-defined]
        try:
            while not stop.is_set():
                frame = feedgen.frame_at(script, clock.now())
                self.request.sendall(feedgen.frame_message(frame))
                clock.sleep(tick, stop=stop)
        except (BrokenPipeError, ConnectionResetError, OSError):
            return  # client went away; reconnects pick up from current time


class SimulatorServer:
    """Serves GET /chroma/flights and streams gzip position frames over TCP."""

    def __init__(self, script: ScenarioScript, clock: SimClock,
                 tick_seconds: float = 5.0, token: str | None = None,
                 host: str = "127.0.0.1", rest_port: int = 0,
                 tcp_port: int = 0):
        self.script = script
        self.clock = clock
        self._stop = threading.Event()
        self._rest = HttpService(ScheduleHandler, host=host, port=rest_port,
                                 script=script, clock=clock, token=token)
        self._tcp = _PositionStreamServer((host, tcp_port),
                                          _PositionStreamHandler)
        self._tcp.script = script  # type: ignore[attr-defined]
        self._tcp.clock = clock  # type: ignore[attr-defined]
        self._tcp.stop_event = self._stop  # type: ignore[attr-defined]
        self._tcp.tick_seconds = tick_seconds  # type: ignore[attr-defined]
        self._tcp_thread: threading.Thread | None = None

    @property
    def rest_url(self) -> str:
        return self._rest.url

    @property
    def schedule_url(self) -> str:
        return f"{self._rest.url}/chroma/flights"

    @property
    def tcp_address(self) -> tuple[str, int]:
        return self._tcp.server_address

    def start(self) -> "SimulatorServer":
        self._rest.start()
        if self._tcp_thread is None:
            self._tcp_thread = threading.Thread(
                target=self._tcp.serve_forever, name="sim-tcp", daemon=True)
            self._tcp_thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._tcp.shutdown()
        if self._tcp_thread is not None:
            self._tcp_thread.join(timeout=10)
            self._tcp_thread = None
        self._tcp.server_close()
        self._rest.stop()

    def __enter__(self) -> "SimulatorServer":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
