"""Append-only history of context changes.

The broker only keeps the latest value of every attribute; this log keeps
all of them. Events are full post-change entity snapshots written as
newline-delimited JSON, one segment file per day of scenario time, with an
in-memory index rebuilt by scanning the segments on startup.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Optional

from ..model import timefmt

_META_KEYS = ("id", "type", "@context")


class HistoryError(Exception):
    """A violated log invariant or an unreadable segment."""


@dataclass(frozen=True)
class HistoryEvent:
    sequence: int
    recorded_at: _dt.datetime
    entity_id: str
    entity_type: str
    changed_attributes: tuple[str, ...]
    snapshot: Mapping

    def to_document(self) -> dict:
        return {
            "sequence": self.sequence,
            "recordedAt": timefmt.format_wire(self.recorded_at),
            "entityId": self.entity_id,
            "entityType": self.entity_type,
            "changedAttributes": list(self.changed_attributes),
            "snapshot": dict(self.snapshot),
        }

    def to_line(self) -> str:
        # byte-stable so identical runs produce identical segment files
        return json.dumps(self.to_document(), sort_keys=True,
                          separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "HistoryEvent":
        try:
            doc = json.loads(line)
            return cls(
                sequence=doc["sequence"],
                recorded_at=timefmt.parse_wire(doc["recordedAt"]),
                entity_id=doc["entityId"],
                entity_type=doc["entityType"],
                changed_attributes=tuple(doc["changedAttributes"]),
                snapshot=doc["snapshot"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise HistoryError(f"unreadable history line: {exc}") from exc


def _attribute_keys(snapshot: Mapping) -> set[str]:
    return {key for key in snapshot if key not in _META_KEYS}


def diff_snapshots(previous: Optional[Mapping],
                   current: Mapping) -> tuple[str, ...]:
    """Attribute names whose documents differ; everything on first sight."""
    if previous is None:
        return tuple(sorted(_attribute_keys(current)))
    names = _attribute_keys(previous) | _attribute_keys(current)
    return tuple(sorted(
        name for name in names
        if previous.get(name) != current.get(name)))


class HistoryStore:
    """Single-writer append log with time-range reads.

    Readers always see a consistent prefix: events enter the in-memory
    index only after their line is on disk.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._events: list[HistoryEvent] = []
        self._by_entity: dict[str, list[HistoryEvent]] = {}
        self._handle: Optional[IO[str]] = None
        self._handle_day: Optional[_dt.date] = None
        self.duplicates_skipped = 0
        self._load()

    # --- startup ---------------------------------------------------------

    def segment_paths(self) -> list[Path]:
        return sorted(self.root.glob("events-*.ndjson"))

    def _load(self) -> None:
        for path in self.segment_paths():
            with path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = HistoryEvent.from_line(line)
                    self._check_order(event)
                    self._index(event)

    def _check_order(self, event: HistoryEvent) -> None:
        if not self._events:
            return
        last = self._events[-1]
        if event.sequence <= last.sequence:
            raise HistoryError(
                f"sequence must increase: {event.sequence} after "
                f"{last.sequence}")
        if event.recorded_at < last.recorded_at:
            raise HistoryError(
                f"recordedAt went backwards at sequence {event.sequence}")

    def _index(self, event: HistoryEvent) -> None:
        self._events.append(event)
        self._by_entity.setdefault(event.entity_id, []).append(event)

    # --- writing -----------------------------------------------------------

    def _segment_for(self, day: _dt.date) -> IO[str]:
        if self._handle is None or self._handle_day != day:
            if self._handle is not None:
                self._handle.close()
            path = self.root / f"events-{day.isoformat()}.ndjson"
            self._handle = path.open("a")
            self._handle_day = day
        return self._handle

    def append(self, entity_id: str, entity_type: str,
               changed_attributes: tuple[str, ...], snapshot: Mapping,
               recorded_at: _dt.datetime) -> int:
        if recorded_at.tzinfo is None:
            recorded_at = recorded_at.replace(tzinfo=timefmt.UTC)
        with self._lock:
            event = HistoryEvent(
                sequence=self._events[-1].sequence + 1 if self._events else 1,
                recorded_at=recorded_at,
                entity_id=entity_id,
                entity_type=entity_type,
                changed_attributes=tuple(changed_attributes),
                snapshot=dict(snapshot),
            )
            self._check_order(event)
            handle = self._segment_for(
                recorded_at.astimezone(timefmt.UTC).date())
            handle.write(event.to_line() + "\n")
            handle.flush()
            self._index(event)
            return event.sequence

    def record_snapshot(self, snapshot: Mapping,
                        recorded_at: _dt.datetime) -> Optional[int]:
        """Append a notification snapshot, diffing against the last one.

        Returns the new sequence number, or None when the snapshot is
        byte-identical to what is already stored (an at-least-once
        redelivery, not a change)."""
        entity_id = snapshot.get("id")
        entity_type = snapshot.get("type")
        if not entity_id or not entity_type:
            raise HistoryError("snapshot lacks id or type")
        with self._lock:
            previous = self._latest_snapshot(entity_id)
            changed = diff_snapshots(previous, snapshot)
            if previous is not None and not changed:
                self.duplicates_skipped += 1
                return None
            return self.append(entity_id, entity_type, changed, snapshot,
                               recorded_at)

    def _latest_snapshot(self, entity_id: str) -> Optional[Mapping]:
        events = self._by_entity.get(entity_id)
        return events[-1].snapshot if events else None

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None
                self._handle_day = None

    def __enter__(self) -> "HistoryStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # --- reading -----------------------------------------------------------

    @property
    def last_sequence(self) -> int:
        with self._lock:
            return self._events[-1].sequence if self._events else 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def entity_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._by_entity)

    def events(self) -> list[HistoryEvent]:
        with self._lock:
            return list(self._events)

    def query(self, entity_id: str,
              from_at: Optional[_dt.datetime] = None,
              to_at: Optional[_dt.datetime] = None) -> list[HistoryEvent]:
        """Events for one entity with from <= recordedAt < to."""
        if from_at is not None and to_at is not None and from_at > to_at:
            raise ValueError("history window is inverted: from > to")
        with self._lock:
            events = list(self._by_entity.get(entity_id, ()))
        return [
            e for e in events
            if (from_at is None or e.recorded_at >= from_at)
            and (to_at is None or e.recorded_at < to_at)
        ]

    # --- replay ---------------------------------------------------------------

    def latest_snapshots(self, to_at: Optional[_dt.datetime] = None,
                         through_sequence: Optional[int] = None
                         ) -> dict[str, Mapping]:
        """Merge each entity's history up to a cut; latest snapshot wins
        because snapshots are full post-change documents."""
        merged: dict[str, Mapping] = {}
        with self._lock:
            for event in self._events:
                if to_at is not None and event.recorded_at >= to_at:
                    continue
                if through_sequence is not None \
                        and event.sequence > through_sequence:
                    continue
                merged[event.entity_id] = event.snapshot
        return merged

    def state_digest(self, to_at: Optional[_dt.datetime] = None,
                     through_sequence: Optional[int] = None) -> str:
        """Same shape the broker digests, for bit-for-bit comparison."""
        merged = self.latest_snapshots(to_at, through_sequence)
        documents = [merged[entity_id] for entity_id in sorted(merged)]
        return json.dumps(documents, sort_keys=True)

    def checksum(self) -> str:
        """SHA-256 over every segment's bytes, in filename order."""
        digest = hashlib.sha256()
        with self._lock:
            if self._handle is not None:
                self._handle.flush()
            for path in self.segment_paths():
                digest.update(path.name.encode())
                digest.update(path.read_bytes())
        return digest.hexdigest()
