"""TCP stream adapter: length-prefixed gzip frames in, FlowRecords out."""
from __future__ import annotations

import gzip
import json
import logging
import socket
import struct
import threading
from typing import Callable

from ..pipeline import FlowRecord

log = logging.getLogger(__name__)

MAX_FRAME_BYTES = 16 * 1024 * 1024


def _recv_exact(sock: socket.socket, count: int) -> bytes | None:
    """Read exactly count bytes, or None on a clean/broken end of stream."""
    chunks = []
    remaining = count
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class TcpStreamClient:
    """Connects to a frame stream and emits one FlowRecord per good frame.

    Reconnects with doubling backoff after disconnects or refused
    connections; a corrupt frame is dropped and counted without breaking
    the stream (the length prefix keeps framing intact).
    """

    def __init__(self, host: str, port: int,
                 emit: Callable[[FlowRecord], None],
                 source_name: str = "tcp",
                 reconnect_backoff: float = 0.2, max_backoff: float = 10.0,
                 connect_timeout: float = 5.0):
        self.host = host
        self.port = port
        self.emit = emit
        self.source_name = source_name
        self.reconnect_backoff = reconnect_backoff
        self.max_backoff = max_backoff
        self.connect_timeout = connect_timeout
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self.frames = 0
        self.corrupt_frames = 0
        self.connections = 0

    def _read_stream(self, sock: socket.socket) -> None:
        while not self._stop.is_set():
            header = _recv_exact(sock, 4)
            if header is None:
                return
            (length,) = struct.unpack(">I", header)
            if length > MAX_FRAME_BYTES:
                log.warning("frame of %d bytes exceeds limit; dropping "
                            "connection", length)
                self.corrupt_frames += 1
                return
            body = _recv_exact(sock, length)
            if body is None:
                return
            try:
                payload = json.loads(gzip.decompress(body).decode("utf-8"))
            except (OSError, ValueError) as exc:
                self.corrupt_frames += 1
                log.warning("dropping corrupt frame %d: %s", self.frames, exc)
                continue
            record = FlowRecord(payload=payload, attributes={},
                                source=self.source_name,
                                sequence=(self.frames,))
            self.frames += 1
            self.emit(record)

    def _loop(self) -> None:
        backoff = self.reconnect_backoff
        while not self._stop.is_set():
            try:
                sock = socket.create_connection(
                    (self.host, self.port), timeout=self.connect_timeout)
            except OSError as exc:
                log.debug("connect to %s:%d failed: %s",
                          self.host, self.port, exc)
                self._stop.wait(timeout=backoff)
                backoff = min(backoff * 2, self.max_backoff)
                continue
            with self._lock:
                self._sock = sock
            self.connections += 1
            backoff = self.reconnect_backoff
            sock.settimeout(None)
            try:
                self._read_stream(sock)
            except OSError:
                pass
            finally:
                with self._lock:
                    self._sock = None
                try:
                    sock.close()
                except OSError:
                    pass
            self._stop.wait(timeout=backoff)

    def start(self) -> "TcpStreamClient":
        if self._thread is None:
            self._stop.clear()
            self._thread = threading.Thread(
                target=self._loop, name=f"tcp-{self.source_name}",
                daemon=True)
            self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        with self._lock:
            if self._sock is not None:
                try:
                    self._sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None
