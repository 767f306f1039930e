"""Pipeline execution: a synchronous path for replay and tests, and a
threaded mode where stages run concurrently over bounded queues."""
from __future__ import annotations

import json
import logging
import queue
import threading
from pathlib import Path
from typing import Any, Callable, Mapping

import requests

from .config import build_stages, load_pipeline_config
from .records import FlowRecord

log = logging.getLogger(__name__)

_SENTINEL = object()
QUEUE_SIZE = 64


class Pipeline:
    """A wired chain of stages with per-stage counters and a failure log.

    The sink comes from the config ("broker_post" POSTs each payload,
    "capture" collects them) unless an explicit callable overrides it.
    """

    def __init__(self, config: str | Path | Mapping,
                 sink: Callable[[FlowRecord], None] | None = None,
                 dead_letter_path: str | Path | None = None,
                 session: requests.Session | None = None):
        self.config = load_pipeline_config(config)
        self.name = self.config.get("name", "pipeline")
        self.stages = build_stages(self.config)
        self.captured: list[Any] = []
        self.dead_letters: list[dict] = []
        self._dead_letter_path = Path(dead_letter_path) if dead_letter_path else None
        self._session = session or requests.Session()
        self._sink = sink or self._sink_from_config()
        self._sink_count = 0
        self._sink_failed = 0
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._queues: list[queue.Queue] = []
        self._running = False

    # --- sinks ---------------------------------------------------------

    def _sink_from_config(self) -> Callable[[FlowRecord], None]:
        spec = self.config["sink"]
        if spec["kind"] == "capture":
            return lambda record: self.captured.append(record.payload)
        url = spec["url"].rstrip("/") + "/entities"
        timeout = spec.get("timeoutSeconds", 10)

        def post(record: FlowRecord) -> None:
            response = self._session.post(url, json=record.payload,
                                          timeout=timeout)
            if response.status_code >= 400:
                raise RuntimeError(
                    f"broker rejected entity: {response.status_code} "
                    f"{response.text[:200]}")
        return post

    def _dead_letter(self, entry: dict) -> None:
        with self._lock:
            self.dead_letters.append(entry)
        if self._dead_letter_path:
            with self._dead_letter_path.open("a") as fh:
                fh.write(json.dumps(entry) + "\n")
        log.warning("pipeline %s: %s failed: %s", self.name,
                    entry.get("stage"), entry.get("reason"))

    def _deliver(self, record: FlowRecord) -> bool:
        try:
            self._sink(record)
        except Exception as exc:
            with self._lock:
                self._sink_failed += 1
            self._dead_letter({"stage": "sink", "reason": str(exc),
                               "source": record.source,
                               "sequence": list(record.sequence)})
            return False
        with self._lock:
            self._sink_count += 1
        return True

    # --- synchronous execution ------------------------------------------

    def process_record(self, record: FlowRecord) -> list[FlowRecord]:
        """Run one record through all stages; returns what reached the end."""
        batch = [record]
        for stage in self.stages:
            next_batch: list[FlowRecord] = []
            for item in batch:
                next_batch.extend(stage.handle(item, self._dead_letter))
            batch = next_batch
            if not batch:
                break
        return batch

    def feed(self, record: FlowRecord) -> list[FlowRecord]:
        """Synchronously process one record and deliver results to the sink."""
        outputs = self.process_record(record)
        return [out for out in outputs if self._deliver(out)]

    def execute(self, records: list[FlowRecord]) -> list[Any]:
        """Synchronous run over a record list; returns delivered payloads."""
        delivered: list[Any] = []
        for record in records:
            delivered.extend(out.payload for out in self.feed(record))
        return delivered

    # --- threaded execution ----------------------------------------------

    def start(self) -> "Pipeline":
        """Wire stage threads over bounded queues (backpressure via put)."""
        if self._running:
            return self
        self._queues = [queue.Queue(maxsize=QUEUE_SIZE)
                        for _ in range(len(self.stages) + 1)]
        self._threads = []
        for i, stage in enumerate(self.stages):
            thread = threading.Thread(
                target=self._stage_worker, args=(stage, i),
                name=f"{self.name}-{stage.name}", daemon=True)
            self._threads.append(thread)
        sink_thread = threading.Thread(
            target=self._sink_worker, name=f"{self.name}-sink", daemon=True)
        self._threads.append(sink_thread)
        self._running = True
        for thread in self._threads:
            thread.start()
        return self

    def _stage_worker(self, stage, index: int) -> None:
        in_queue, out_queue = self._queues[index], self._queues[index + 1]
        while True:
            item = in_queue.get()
            if item is _SENTINEL:
                out_queue.put(_SENTINEL)
                return
            for output in stage.handle(item, self._dead_letter):
                out_queue.put(output)

    def _sink_worker(self) -> None:
        in_queue = self._queues[-1]
        while True:
            item = in_queue.get()
            if item is _SENTINEL:
                return
            self._deliver(item)

    def submit(self, record: FlowRecord) -> None:
        """Feed the running pipeline; blocks when the first queue is full."""
        if not self._running:
            raise RuntimeError("pipeline is not running")
        self._queues[0].put(record)

    def stop(self, timeout: float = 10.0) -> None:
        if not self._running:
            return
        self._queues[0].put(_SENTINEL)
        for thread in self._threads:
            thread.join(timeout=timeout)
        self._running = False

    # --- introspection ----------------------------------------------------

    def counters(self) -> dict:
        with self._lock:
            sink = {"delivered": self._sink_count, "failed": self._sink_failed}
        return {
            "name": self.name,
            "stages": {stage.name: stage.counters() for stage in self.stages},
            "sink": sink,
            "deadLetters": len(self.dead_letters),
        }
