"""Turnaround engine service.

A broker client that subscribes to Flight changes, recomputes derived
times, links turnarounds, and manages task plans. Its own HTTP face takes
milestone reports and task status changes so rejections happen
synchronously, before anything reaches the broker.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import logging
import threading
from typing import Any, Callable, Optional
from urllib.parse import parse_qs, unquote, urlparse

from ..broker import BrokerClient
from ..model import (
    ContextEntity,
    FlightRecord,
    make_entity_id,
    parse_entity,
    timefmt,
)
from ..webutil import HttpService, JsonHandler
from . import acdm
from .acdm import MilestoneError, TurnaroundLink
from .tasks import DEFAULT_TASK_TEMPLATE, TaskError, TaskPlan, build_plan, manage_task

log = logging.getLogger(__name__)

# what the engine needs to hear about; its own derived writes
# (dateAXOT/dateAXIT/dateATTT) stay out so they cannot echo back
WATCHED_FLIGHT_ATTRIBUTES = (
    "flightNumber", "state", "dateScheduled",
    "dateSOBT", "dateSIBT", "dateAOBT", "dateTOBT", "dateEOBT",
    "dateATOT", "dateETOT", "dateALDT", "dateELDT", "dateAIBT", "dateEIBT",
    "hasAircraft", "arrivesToAirport", "departsFromAirport", "standCode",
)


class EngineError(Exception):
    def __init__(self, status: int, message: str,
                 blocking_task: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.blocking_task = blocking_task

    def payload(self) -> dict:
        doc: dict[str, Any] = {"error": str(self)}
        if self.blocking_task:
            doc["blockingTask"] = self.blocking_task
        return doc


def _wall_clock() -> _dt.datetime:
    return _dt.datetime.now(timefmt.UTC)


class EngineService:
    def __init__(self, broker_url: str, airport_iata: str = "ABZ",
                 clock: Callable[[], _dt.datetime] = _wall_clock,
                 delay_threshold_s: float = acdm.DEFAULT_DELAY_THRESHOLD_S,
                 task_template=DEFAULT_TASK_TEMPLATE,
                 host: str = "127.0.0.1", port: int = 0):
        self.client = BrokerClient(broker_url)
        self.airport_urn = make_entity_id("Airport", airport_iata)
        self.clock = clock
        self.delay_threshold_s = delay_threshold_s
        self.task_template = tuple(task_template)
        self._flights: dict[str, FlightRecord] = {}
        self._plans: dict[str, TaskPlan] = {}
        self._links: dict[str, TurnaroundLink] = {}
        self._state_lock = threading.RLock()
        self._flight_locks: dict[str, threading.Lock] = {}
        self._subscription_id: Optional[str] = None
        self.metrics = {
            "notificationsProcessed": 0, "flightsTracked": 0,
            "derivedWrites": 0, "milestonesApplied": 0,
            "milestonesRejected": 0, "taskUpdates": 0, "tasksRejected": 0,
            "linksFormed": 0,
        }
        self._service = HttpService(EngineHandler, host=host, port=port,
                                    engine=self)

    # --- lifecycle -----------------------------------------------------------

    @property
    def url(self) -> str:
        return self._service.url

    def start(self, subscribe: bool = True) -> "EngineService":
        self._service.start()
        if subscribe:
            self._subscription_id = self.client.subscribe(
                "Flight", f"{self.url}/notifications",
                watched_attributes=WATCHED_FLIGHT_ATTRIBUTES)
            self.load_existing()
        return self

    def stop(self) -> None:
        if self._subscription_id is not None:
            try:
                self.client.unsubscribe(self._subscription_id)
            except Exception:  # noqa: BLE001 - broker may be gone already
                log.debug("unsubscribe on shutdown failed", exc_info=True)
            self._subscription_id = None
        self._service.stop()

    def __enter__(self) -> "EngineService":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()

    def load_existing(self) -> int:
        """Pull flights already in the broker (engine started late)."""
        count = 0
        for entity in self.client.query("Flight"):
            self.ingest_flight(entity)
            count += 1
        return count

    # --- flight ingestion ------------------------------------------------------

    def _lock_for(self, flight_id: str) -> threading.Lock:
        with self._state_lock:
            lock = self._flight_locks.get(flight_id)
            if lock is None:
                lock = self._flight_locks[flight_id] = threading.Lock()
            return lock

    def handle_notification(self, payload: dict) -> None:
        for document in payload.get("data", ()):
            if document.get("type") != "Flight":
                continue
            try:
                self.ingest_flight(parse_entity(document))
            except Exception:  # noqa: BLE001 - a bad doc must not kill the feed
                log.exception("could not ingest %s", document.get("id"))
        self.metrics["notificationsProcessed"] += 1

    def ingest_flight(self, entity: ContextEntity) -> FlightRecord:
        record = FlightRecord.from_entity(entity)
        with self._lock_for(entity.id):
            known = self._flights.get(entity.id)
            if known is not None:
                record = self._merge_known(known, record)
            record = self._write_derived(record)
            with self._state_lock:
                if entity.id not in self._flights:
                    self.metrics["flightsTracked"] += 1
                self._flights[entity.id] = record
                if record.is_departure_from(self.airport_urn) \
                        and entity.id not in self._plans:
                    self._plans[entity.id] = build_plan(
                        entity.id, issued_at=self.clock(),
                        template=self.task_template)
        self._refresh_links(record)
        return record

    def _merge_known(self, known: FlightRecord,
                     incoming: FlightRecord) -> FlightRecord:
        """Notification documents are whole entities, but be defensive about
        fields the engine filled that a snapshot may predate."""
        updates = {}
        for name in incoming.FIELD_SHAPES:
            value = getattr(incoming, name)
            if value is not None:
                updates[name] = value
        return dataclasses.replace(known, **updates)

    def _write_derived(self, record: FlightRecord) -> FlightRecord:
        try:
            updates = {
                field: value
                for field, value in acdm.derived_times(record).items()
                if getattr(record, field) != value
            }
        except MilestoneError as exc:
            log.warning("flight %s has inconsistent actuals: %s",
                        record.entity_id, exc)
            return record
        if not updates:
            return record
        partial = FlightRecord(key=record.key, **updates)
        self.client.upsert(partial.to_entity())
        self.metrics["derivedWrites"] += 1
        return dataclasses.replace(record, **updates)

    def _refresh_links(self, record: FlightRecord) -> None:
        """Re-evaluate pairings the changed flight could take part in."""
        with self._state_lock:
            flights = list(self._flights.values())
        if record.is_departure_from(self.airport_urn):
            outbounds = [record]
        elif record.is_arrival_at(self.airport_urn) and record.hasAircraft:
            outbounds = [f for f in flights
                         if f.is_departure_from(self.airport_urn)
                         and f.hasAircraft == record.hasAircraft]
        else:
            return
        for outbound in outbounds:
            self._link_one(outbound, flights)

    def _link_one(self, outbound: FlightRecord,
                  flights: list[FlightRecord]) -> None:
        if not outbound.hasAircraft:
            return
        candidates = [
            f for f in flights
            if f.is_arrival_at(self.airport_urn)
            and f.hasAircraft == outbound.hasAircraft
            and f.entity_id != outbound.entity_id
        ]
        if outbound.dateAOBT is not None:
            candidates = [f for f in candidates
                          if f.dateAIBT is None
                          or f.dateAIBT <= outbound.dateAOBT]

        def arrival_order(f: FlightRecord):
            return f.dateAIBT or f.dateSIBT or f.dateScheduled \
                or _dt.datetime.min.replace(tzinfo=timefmt.UTC)

        if not candidates:
            return
        inbound = max(candidates, key=arrival_order)
        try:
            link = acdm.link_turnaround(inbound, outbound, self.airport_urn)
        except MilestoneError as exc:
            log.debug("not linking %s: %s", outbound.entity_id, exc)
            return
        with self._state_lock:
            previous = self._links.get(outbound.entity_id)
            if previous is None:
                self.metrics["linksFormed"] += 1
            self._links[outbound.entity_id] = link
        if link.attt is not None and outbound.dateATTT != link.attt:
            partial = FlightRecord(key=outbound.key, dateATTT=link.attt)
            self.client.upsert(partial.to_entity())
            with self._lock_for(outbound.entity_id), self._state_lock:
                self._flights[outbound.entity_id] = dataclasses.replace(
                    self._flights[outbound.entity_id], dateATTT=link.attt)

    # --- commands ---------------------------------------------------------------

    def apply_milestone(self, flight_id: str, milestone: str,
                        at: _dt.datetime) -> FlightRecord:
        with self._lock_for(flight_id):
            record = self._flights.get(flight_id)
            if record is None:
                entity = self.client.get_or_none(flight_id)
                if entity is None:
                    raise EngineError(404, f"no flight {flight_id}")
                record = FlightRecord.from_entity(entity)
            try:
                updated, changed = acdm.apply_milestone(record, milestone, at)
            except MilestoneError as exc:
                self.metrics["milestonesRejected"] += 1
                raise EngineError(409, str(exc)) from exc
            if changed:
                partial = FlightRecord(key=updated.key, **changed)
                self.client.upsert(partial.to_entity())
                with self._state_lock:
                    self._flights[flight_id] = updated
            self.metrics["milestonesApplied"] += 1
        self._refresh_links(updated if changed else record)
        return updated

    def set_task_status(self, task_ref: str, new_status: str) -> dict:
        with self._state_lock:
            plan = self._plan_for_task(task_ref)
            if plan is None:
                raise EngineError(404, f"no task {task_ref!r}")
            try:
                task, changed = manage_task(plan, task_ref, new_status,
                                            at=self.clock())
            except TaskError as exc:
                self.metrics["tasksRejected"] += 1
                raise EngineError(409, str(exc),
                                  blocking_task=exc.blocking_task) from exc
        if changed:
            self.client.upsert(task.record.to_entity())
            self.metrics["taskUpdates"] += 1
        return {
            "id": task.record.entity_id,
            "name": task.name,
            "status": task.status,
            "flight": plan.flight_id,
            "changed": changed,
        }

    def _plan_for_task(self, task_ref: str) -> Optional[TaskPlan]:
        for plan in self._plans.values():
            try:
                plan.find(task_ref)
                return plan
            except TaskError:
                continue
        return None

    # --- views -----------------------------------------------------------------

    def flight_view(self, record: FlightRecord) -> dict:
        if record.is_arrival_at(self.airport_urn):
            arrival: Optional[bool] = True
        elif record.is_departure_from(self.airport_urn):
            arrival = False
        else:
            arrival = None
        delay = acdm.classify_delay(record, self.clock(),
                                    self.delay_threshold_s, arrival=arrival)
        link = self._links.get(record.entity_id)
        plan = self._plans.get(record.entity_id)
        return {
            "flight": record.to_entity().to_document(),
            "delay": delay.to_document(),
            "link": link.to_document() if link else None,
            "tasks": plan.to_document()["tasks"] if plan else None,
        }

    def flights_view(self) -> list[dict]:
        with self._state_lock:
            records = sorted(self._flights.values(), key=lambda r: r.entity_id)
        return [self.flight_view(r) for r in records]

    def metrics_snapshot(self) -> dict:
        with self._state_lock:
            snapshot = dict(self.metrics)
            snapshot["plans"] = len(self._plans)
            snapshot["links"] = len(self._links)
        return snapshot


class EngineHandler(JsonHandler):
    @property
    def engine(self) -> EngineService:
        return self.server.engine  # type: ignore[attr-defined]

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        segments = [unquote(s) for s in parsed.path.split("/") if s]
        try:
            handled = self._route(method, segments, parse_qs(parsed.query))
        except EngineError as exc:
            self.send_json(exc.status, exc.payload())
            return
        except json.JSONDecodeError as exc:
            self.send_json(400, {"error": f"request body is not JSON: {exc}"})
            return
        except Exception:
            log.exception("unhandled engine error for %s %s",
                          method, self.path)
            self.send_json(500, {"error": "internal error"})
            return
        if not handled:
            self.send_json(404, {"error": f"no route {method} {parsed.path}"})

    def _route(self, method: str, segments: list[str],
               params: dict[str, list[str]]) -> bool:
        engine = self.engine
        if segments == ["health"] and method == "GET":
            self.send_json(200, {"status": "ok"})
            return True
        if segments == ["metrics"] and method == "GET":
            self.send_json(200, engine.metrics_snapshot())
            return True
        if segments == ["notifications"] and method == "POST":
            engine.handle_notification(self.read_json() or {})
            self.send_json(200, {"status": "accepted"})
            return True
        if segments == ["flights"] and method == "GET":
            self.send_json(200, engine.flights_view())
            return True
        if len(segments) == 2 and segments[0] == "flights" and method == "GET":
            with engine._state_lock:
                record = engine._flights.get(segments[1])
            if record is None:
                raise EngineError(404, f"no flight {segments[1]}")
            self.send_json(200, engine.flight_view(record))
            return True
        if len(segments) == 3 and segments[0] == "flights" \
                and segments[2] == "milestones" and method == "POST":
            body = self.read_json() or {}
            milestone = body.get("milestone", "")
            raw_at = body.get("at", "")
            try:
                at = timefmt.parse_wire(raw_at)
            except (TypeError, ValueError) as exc:
                raise EngineError(400, f"bad timestamp {raw_at!r}") from exc
            record = engine.apply_milestone(segments[1], milestone, at)
            self.send_json(200, engine.flight_view(record))
            return True
        if segments == ["tasks"] and method == "GET":
            flight = params.get("flight", [None])[0]
            with engine._state_lock:
                if flight:
                    plan = engine._plans.get(flight)
                    plans = [plan] if plan else []
                else:
                    plans = list(engine._plans.values())
            self.send_json(200, [p.to_document() for p in plans])
            return True
        if len(segments) == 3 and segments[0] == "tasks" \
                and segments[2] == "status" and method == "POST":
            body = self.read_json() or {}
            result = engine.set_task_status(segments[1],
                                            body.get("status", ""))
            self.send_json(200, result)
            return True
        return False

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")
