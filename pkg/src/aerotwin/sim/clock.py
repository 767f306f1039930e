"""Simulation clock: wall-time, accelerated, or manually stepped."""
from __future__ import annotations

import datetime as _dt
import threading
import time

from ..model import timefmt


class SimClock:
    """Maps wall time onto simulated time, or runs on manual advances.

    scale 1.0 tracks wall time; scale 60 runs a simulated minute per real
    second. manual=True ignores wall time entirely: now() only moves when
    advance() is called, which is what deterministic runs use.
    """

    def __init__(self, start: _dt.datetime, scale: float = 1.0,
                 manual: bool = False):
        if start.tzinfo is None:
            start = start.replace(tzinfo=timefmt.UTC)
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.start = start.astimezone(timefmt.UTC)
        self.scale = scale
        self.manual = manual
        self._manual_elapsed = 0.0
        self._wall_start = time.monotonic()
        self._lock = threading.Lock()
        self._changed = threading.Condition(self._lock)

    def now(self) -> _dt.datetime:
        with self._lock:
            if self.manual:
                elapsed = self._manual_elapsed
            else:
                elapsed = (time.monotonic() - self._wall_start) * self.scale
        return self.start + _dt.timedelta(seconds=elapsed)

    def elapsed(self) -> float:
        """Simulated seconds since start."""
        return (self.now() - self.start).total_seconds()

    def advance(self, seconds: float) -> _dt.datetime:
        """Step a manual clock forward; wakes any sleeper."""
        if not self.manual:
            raise RuntimeError("advance() only applies to a manual clock")
        if seconds < 0:
            raise ValueError("cannot advance backwards")
        with self._changed:
            self._manual_elapsed += seconds
            self._changed.notify_all()
        return self.now()

    def sleep(self, sim_seconds: float, stop: threading.Event | None = None) -> None:
        """Block for the given amount of simulated time.

        On a manual clock this waits for advance() calls; stop aborts early.
        """
        target = self.elapsed() + sim_seconds
        if self.manual:
            with self._changed:
                while self._manual_elapsed < target:
                    if stop is not None and stop.is_set():
                        return
                    self._changed.wait(timeout=0.1)
            return
        wall = sim_seconds / self.scale
        if stop is not None:
            stop.wait(timeout=wall)
        else:
            time.sleep(wall)
