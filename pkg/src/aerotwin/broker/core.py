"""Context broker core: last-value entity store plus subscription dispatch.

Updates are merge-patch (attributes present in the request overwrite stored
ones, absent ones are preserved) and serialized per entity. A change event
fires when a stored attribute's serialized value actually differs; dispatch
runs asynchronously relative to the triggering upsert, either on the
dispatcher thread (live mode) or via an explicit flush (deterministic runs).
"""
from __future__ import annotations

import datetime as _dt
import fnmatch
import itertools
import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping
from urllib.parse import urlparse

import requests

from ..model import (
    ContextEntity,
    ParseError,
    parse_entity,
    serialize_entity,
    timefmt,
    validate_entity,
)

log = logging.getLogger(__name__)

COMPARATORS = {
    "eq": lambda a, b: a == b,
    "lt": lambda a, b: a < b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "ge": lambda a, b: a >= b,
}


class BrokerError(Exception):
    """API-level failure carrying an HTTP-ish status code and detail."""

    def __init__(self, status: int, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.status = status
        self.violations = violations or []

    def payload(self) -> dict:
        doc: dict[str, Any] = {"error": str(self)}
        if self.violations:
            doc["violations"] = self.violations
        return doc


@dataclass
class Subscription:
    id: str
    entityTypeFilter: str
    notificationEndpoint: str
    entityIdFilter: str | None = None
    watchedAttributes: frozenset[str] = frozenset()
    createdAt: _dt.datetime | None = None
    deliveredCount: int = 0

    def matches(self, entity_type: str, entity_id: str,
                changed: set[str]) -> bool:
        if self.entityTypeFilter not in ("*", entity_type):
            return False
        if self.entityIdFilter and not fnmatch.fnmatchcase(
                entity_id, self.entityIdFilter):
            return False
        if self.watchedAttributes and not (self.watchedAttributes & changed):
            return False
        return True

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "entityTypeFilter": self.entityTypeFilter,
            "entityIdFilter": self.entityIdFilter,
            "watchedAttributes": sorted(self.watchedAttributes),
            "notificationEndpoint": self.notificationEndpoint,
            "createdAt": timefmt.format_wire(self.createdAt)
            if self.createdAt else None,
            "deliveredCount": self.deliveredCount,
        }


@dataclass(frozen=True)
class ChangeEvent:
    entity_id: str
    entity_type: str
    changed: frozenset[str]
    snapshot: Mapping[str, Any]  # serialized post-change document
    at: _dt.datetime


def _wall_clock() -> _dt.datetime:
    return _dt.datetime.now(timefmt.UTC)


class ContextBroker:
    """In-memory last-value store with pub-sub notification dispatch."""

    def __init__(self, clock: Callable[[], _dt.datetime] = _wall_clock,
                 retry_attempts: int = 3, retry_backoff: float = 0.5,
                 request_timeout: float = 10.0):
        self._clock = clock
        self.retry_attempts = retry_attempts
        self.retry_backoff = retry_backoff
        self.request_timeout = request_timeout
        self._entities: dict[str, ContextEntity] = {}
        self._subscriptions: dict[str, Subscription] = {}
        self._sub_counter = itertools.count(1)
        self._lock = threading.RLock()
        self._events: queue.Queue = queue.Queue()
        self._session = requests.Session()
        self._dispatcher: threading.Thread | None = None
        self._stopping = threading.Event()
        self.metrics = {
            "entitiesCreated": 0, "entitiesUpdated": 0, "entitiesDeleted": 0,
            "changeEvents": 0, "notificationsDelivered": 0,
            "notificationsDropped": 0, "deliveryAttempts": 0,
        }

    # --- entity operations --------------------------------------------------

    def upsert_entity(self, document: Mapping | ContextEntity) -> str:
        """Merge-patch an entity; returns "created" or "updated"."""
        if isinstance(document, ContextEntity):
            incoming = document
        else:
            try:
                incoming = parse_entity(document)
            except ParseError as exc:
                raise BrokerError(400, "entity does not parse",
                                  [str(exc)]) from exc
        with self._lock:
            stored = self._entities.get(incoming.id)
            if stored is None:
                merged = incoming
                result = "created"
                changed = set(incoming.attributes)
            else:
                if stored.type != incoming.type:
                    raise BrokerError(
                        400, f"type mismatch for {incoming.id}: stored "
                        f"{stored.type}, got {incoming.type}")
                merged = stored.with_attributes(incoming.attributes)
                result = "updated"
                changed = {
                    name for name, attr in incoming.attributes.items()
                    if name not in stored.attributes
                    or stored.attributes[name].to_document() != attr.to_document()
                }
            violations = validate_entity(merged)
            if violations:
                raise BrokerError(400, "entity is invalid", violations)
            self._entities[incoming.id] = merged
            self.metrics["entitiesCreated" if result == "created"
                         else "entitiesUpdated"] += 1
            if changed:
                self.metrics["changeEvents"] += 1
                event = ChangeEvent(
                    entity_id=merged.id, entity_type=merged.type,
                    changed=frozenset(changed),
                    snapshot=serialize_entity(merged), at=self._clock())
                self._events.put(event)
        return result

    def get_entity(self, entity_id: str) -> ContextEntity:
        with self._lock:
            entity = self._entities.get(entity_id)
        if entity is None:
            raise BrokerError(404, f"no entity {entity_id}")
        return entity

    def delete_entity(self, entity_id: str) -> None:
        with self._lock:
            if entity_id not in self._entities:
                raise BrokerError(404, f"no entity {entity_id}")
            del self._entities[entity_id]
            self.metrics["entitiesDeleted"] += 1

    def _filter_matches(self, entity: ContextEntity,
                        name: str, comparator: str, raw_value: str) -> bool:
        attr = entity.attributes.get(name)
        if attr is None:
            return False
        value = attr.value
        compare = COMPARATORS[comparator]
        if isinstance(value, _dt.datetime):
            try:
                return compare(value, timefmt.parse_wire(str(raw_value)))
            except ValueError:
                return False
        if isinstance(value, bool):
            return compare(value, str(raw_value).lower() == "true")
        if isinstance(value, (int, float)):
            try:
                return compare(float(value), float(raw_value))
            except (TypeError, ValueError):
                return False
        return compare(value, raw_value)

    def query_entities(self, type_filter: str,
                       attribute_filters: list[tuple[str, str, str]] = (),
                       time_window: tuple[str, _dt.datetime, _dt.datetime] | None = None,
                       ) -> list[ContextEntity]:
        """All entities of the type passing every filter, ordered by id.

        The time window is inclusive on both ends.
        """
        for _, comparator, _ in attribute_filters:
            if comparator not in COMPARATORS:
                raise BrokerError(400, f"unknown comparator {comparator!r}")
        with self._lock:
            candidates = [e for e in self._entities.values()
                          if e.type == type_filter]
        selected = []
        for entity in candidates:
            if not all(self._filter_matches(entity, n, c, v)
                       for n, c, v in attribute_filters):
                continue
            if time_window is not None:
                window_field, start, end = time_window
                value = entity.attr_value(window_field)
                if not isinstance(value, _dt.datetime):
                    continue
                if start is not None and value < start:
                    continue
                if end is not None and value > end:
                    continue
            selected.append(entity)
        return sorted(selected, key=lambda e: e.id)

    # --- subscriptions --------------------------------------------------------

    def create_subscription(self, entity_type_filter: str,
                            notification_endpoint: str,
                            watched_attributes: Iterable = (),
                            entity_id_filter: str | None = None) -> str:
        if not entity_type_filter:
            raise BrokerError(400, "entityTypeFilter must be non-empty")
        parsed = urlparse(notification_endpoint or "")
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise BrokerError(
                400, f"notificationEndpoint must be an absolute HTTP URL, "
                f"got {notification_endpoint!r}")
        with self._lock:
            sub_id = f"sub-{next(self._sub_counter)}"
            self._subscriptions[sub_id] = Subscription(
                id=sub_id, entityTypeFilter=entity_type_filter,
                notificationEndpoint=notification_endpoint,
                entityIdFilter=entity_id_filter,
                watchedAttributes=frozenset(watched_attributes or ()),
                createdAt=self._clock())
        return sub_id

    def delete_subscription(self, sub_id: str) -> None:
        with self._lock:
            if sub_id not in self._subscriptions:
                raise BrokerError(404, f"no subscription {sub_id}")
            del self._subscriptions[sub_id]

    def list_subscriptions(self) -> list[dict]:
        with self._lock:
            subs = sorted(self._subscriptions.values(),
                          key=lambda s: int(s.id.split("-")[1]))
            return [s.to_document() for s in subs]

    # --- notification dispatch -------------------------------------------------

    def _matching_subscriptions(self, event: ChangeEvent) -> list[Subscription]:
        with self._lock:
            subs = sorted(self._subscriptions.values(),
                          key=lambda s: int(s.id.split("-")[1]))
            return [s for s in subs
                    if s.matches(event.entity_type, event.entity_id,
                                 set(event.changed))]

    def _deliver(self, sub: Subscription, event: ChangeEvent) -> bool:
        payload = {
            "subscriptionId": sub.id,
            "notifiedAt": timefmt.format_wire(event.at),
            "data": [dict(event.snapshot)],
        }
        backoff = self.retry_backoff
        for attempt in range(1, self.retry_attempts + 1):
            self.metrics["deliveryAttempts"] += 1
            try:
                response = self._session.post(
                    sub.notificationEndpoint, json=payload,
                    timeout=self.request_timeout)
                if 200 <= response.status_code < 300:
                    with self._lock:
                        sub.deliveredCount += 1
                        self.metrics["notificationsDelivered"] += 1
                    return True
                reason = f"status {response.status_code}"
            except requests.RequestException as exc:
                reason = str(exc)
            if attempt < self.retry_attempts:
                time.sleep(backoff)
                backoff *= 2
        log.warning("dropping notification for %s after %d attempts (%s)",
                    sub.id, self.retry_attempts, reason)
        with self._lock:
            self.metrics["notificationsDropped"] += 1
        return False

    def _dispatch_event(self, event: ChangeEvent) -> None:
        for sub in self._matching_subscriptions(event):
            self._deliver(sub, event)

    def flush_notifications(self) -> int:
        """Synchronously dispatch every queued change event; returns count."""
        handled = 0
        while True:
            try:
                event = self._events.get_nowait()
            except queue.Empty:
                return handled
            self._dispatch_event(event)
            handled += 1

    def start_dispatcher(self) -> None:
        if self._dispatcher is not None:
            return
        self._stopping.clear()

        def loop():
            while not self._stopping.is_set():
                try:
                    event = self._events.get(timeout=0.1)
                except queue.Empty:
                    continue
                self._dispatch_event(event)

        self._dispatcher = threading.Thread(
            target=loop, name="broker-dispatch", daemon=True)
        self._dispatcher.start()

    def stop_dispatcher(self, drain: bool = True, timeout: float = 10.0) -> None:
        if self._dispatcher is None:
            return
        if drain:
            deadline = time.monotonic() + timeout
            while not self._events.empty() and time.monotonic() < deadline:
                time.sleep(0.02)
        self._stopping.set()
        self._dispatcher.join(timeout=timeout)
        self._dispatcher = None

    # --- introspection ---------------------------------------------------------

    def entity_count(self) -> int:
        with self._lock:
            return len(self._entities)

    def all_entities(self) -> list[ContextEntity]:
        with self._lock:
            return sorted(self._entities.values(), key=lambda e: e.id)

    def state_digest(self) -> str:
        """Canonical JSON of the full store, for end-state comparison."""
        documents = [serialize_entity(e) for e in self.all_entities()]
        return json.dumps(documents, sort_keys=True)

    def metrics_snapshot(self) -> dict:
        with self._lock:
            snapshot = dict(self.metrics)
        snapshot["entities"] = self.entity_count()
        snapshot["subscriptions"] = len(self._subscriptions)
        snapshot["queuedEvents"] = self._events.qsize()
        return snapshot
