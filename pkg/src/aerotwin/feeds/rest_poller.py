"""Polling REST adapter: one GET per interval, one FlowRecord per 2xx body."""
from __future__ import annotations

import logging
import threading
import time
from typing import Callable

import requests

from ..pipeline import FlowRecord

log = logging.getLogger(__name__)


class RestPoller:
    """Polls an endpoint and hands each JSON body to `emit` as a FlowRecord.

    A failed tick (non-2xx, timeout, bad JSON) is logged and counted; the
    next tick proceeds as normal.
    """

    def __init__(self, url: str, interval_seconds: float,
                 emit: Callable[[FlowRecord], None],
                 headers: dict | None = None, source_name: str = "rest",
                 session: requests.Session | None = None,
                 timeout: float | None = None):
        if interval_seconds <= 0:
            raise ValueError("interval must be positive")
        self.url = url
        self.interval = interval_seconds
        self.emit = emit
        self.headers = dict(headers or {})
        self.source_name = source_name
        self.timeout = timeout if timeout is not None else max(
            1.0, min(interval_seconds, 10.0))
        self._session = session or requests.Session()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.polls = 0
        self.records = 0
        self.failures = 0

    def poll_once(self) -> FlowRecord | None:
        self.polls += 1
        try:
            response = self._session.get(self.url, headers=self.headers,
                                         timeout=self.timeout)
            if not 200 <= response.status_code < 300:
                raise ValueError(f"status {response.status_code}")
            payload = response.json()
        except (requests.RequestException, ValueError) as exc:
            self.failures += 1
            log.warning("poll %d of %s failed: %s", self.polls, self.url, exc)
            return None
        record = FlowRecord(payload=payload, attributes={},
                            source=self.source_name,
                            sequence=(self.records,))
        self.records += 1
        self.emit(record)
        return record

    def _loop(self) -> None:
        while not self._stop.is_set():
            started = time.monotonic()
            self.poll_once()
            remaining = self.interval - (time.monotonic() - started)
            if remaining > 0:
                self._stop.wait(timeout=remaining)

    def start(self) -> "RestPoller":
        if self._thread is None:
            self._stop.clear()
            self._thread = threading.Thread(
                target=self._loop, name=f"poll-{self.source_name}",
                daemon=True)
            self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None
