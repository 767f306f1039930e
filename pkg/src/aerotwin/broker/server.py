"""HTTP face of the context broker."""
from __future__ import annotations

import json
import logging
import re
from typing import Any
from urllib.parse import parse_qs, unquote, urlparse

from ..model import timefmt
from ..webutil import HttpService, JsonHandler
from .core import BrokerError, ContextBroker

log = logging.getLogger(__name__)

# two-character comparators first so "<=" does not parse as "<"
_CONSTRAINT_RE = re.compile(r"^([A-Za-z0-9._-]+)(==|<=|>=|<|>)(.+)$")
_COMPARATOR_NAMES = {"==": "eq", "<": "lt", ">": "gt", "<=": "le", ">=": "ge"}


def parse_query_expression(expression: str) -> list[tuple[str, str, str]]:
    """Split a q expression ("a==x;b>=y") into (name, comparator, value)."""
    filters = []
    for raw in expression.split(";"):
        constraint = raw.strip()
        if not constraint:
            continue
        match = _CONSTRAINT_RE.match(constraint)
        if not match:
            raise BrokerError(400, f"cannot parse constraint {constraint!r}")
        name, op, value = match.groups()
        filters.append((name, _COMPARATOR_NAMES[op], value))
    return filters


def parse_time_window(params: dict[str, list[str]]):
    timerel = _single(params, "timerel")
    if timerel is None:
        return None
    timeproperty = _single(params, "timeproperty")
    time_at = _single(params, "timeAt")
    end_time_at = _single(params, "endTimeAt")
    if not timeproperty or not time_at:
        raise BrokerError(400, "timerel requires timeproperty and timeAt")
    try:
        start = timefmt.parse_wire(time_at)
        end = timefmt.parse_wire(end_time_at) if end_time_at else None
    except ValueError as exc:
        raise BrokerError(400, f"bad timestamp: {exc}") from exc
    if timerel == "between":
        if end is None:
            raise BrokerError(400, "timerel=between requires endTimeAt")
        return (timeproperty, start, end)
    if timerel == "after":
        return (timeproperty, start, None)
    if timerel == "before":
        return (timeproperty, None, start)
    raise BrokerError(400, f"unknown timerel {timerel!r}")


def _single(params: dict[str, list[str]], name: str) -> str | None:
    values = params.get(name)
    return values[0] if values else None


class BrokerHandler(JsonHandler):
    @property
    def broker(self) -> ContextBroker:
        return self.server.broker  # type: ignore[attr-defined]

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        segments = [unquote(s) for s in parsed.path.split("/") if s]
        try:
            handled = self._route(method, segments, parse_qs(parsed.query))
        except BrokerError as exc:
            self.send_json(exc.status, exc.payload())
            return
        except json.JSONDecodeError as exc:
            self.send_json(400, {"error": f"request body is not JSON: {exc}"})
            return
        except Exception:
            log.exception("unhandled broker error for %s %s", method, self.path)
            self.send_json(500, {"error": "internal error"})
            return
        if not handled:
            self.send_json(404, {"error": f"no route {method} {parsed.path}"})

    def _route(self, method: str, segments: list[str],
               params: dict[str, list[str]]) -> bool:
        broker = self.broker
        if segments == ["health"] and method == "GET":
            self.send_json(200, {"status": "ok"})
            return True
        if segments == ["metrics"] and method == "GET":
            self.send_json(200, broker.metrics_snapshot())
            return True
        if segments == ["entities"]:
            if method == "POST":
                result = broker.upsert_entity(self.read_json() or {})
                self.send_json(201 if result == "created" else 200,
                               {"result": result})
                return True
            if method == "GET":
                type_filter = _single(params, "type")
                if not type_filter:
                    raise BrokerError(400, "query requires a type parameter")
                q = _single(params, "q")
                filters = parse_query_expression(q) if q else []
                window = parse_time_window(params)
                entities = broker.query_entities(type_filter, filters, window)
                self.send_json(200, [e.to_document() for e in entities])
                return True
        if len(segments) == 2 and segments[0] == "entities":
            entity_id = segments[1]
            if method == "GET":
                self.send_json(200, broker.get_entity(entity_id).to_document())
                return True
            if method == "DELETE":
                broker.delete_entity(entity_id)
                self.send_json(204)
                return True
        if segments == ["subscriptions"]:
            if method == "POST":
                body = self.read_json() or {}
                sub_id = broker.create_subscription(
                    body.get("entityTypeFilter", ""),
                    body.get("notificationEndpoint", ""),
                    body.get("watchedAttributes") or (),
                    body.get("entityIdFilter"))
                self.send_json(201, {"id": sub_id})
                return True
            if method == "GET":
                self.send_json(200, broker.list_subscriptions())
                return True
        if len(segments) == 2 and segments[0] == "subscriptions":
            if method == "DELETE":
                broker.delete_subscription(segments[1])
                self.send_json(204)
                return True
        return False

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_DELETE(self) -> None:
        self._dispatch("DELETE")


class BrokerServer:
    """Context broker bound to an HTTP port, with its dispatcher thread."""

    def __init__(self, broker: ContextBroker | None = None,
                 host: str = "127.0.0.1", port: int = 0,
                 dispatch: str = "thread"):
        self.broker = broker or ContextBroker()
        if dispatch not in ("thread", "manual"):
            raise ValueError(f"dispatch must be thread or manual, got {dispatch!r}")
        self._dispatch = dispatch
        self._service = HttpService(BrokerHandler, host=host, port=port,
                                    broker=self.broker)

    @property
    def url(self) -> str:
        return self._service.url

    @property
    def port(self) -> int:
        return self._service.port

    def start(self) -> "BrokerServer":
        self._service.start()
        if self._dispatch == "thread":
            self.broker.start_dispatcher()
        return self

    def stop(self) -> None:
        if self._dispatch == "thread":
            self.broker.stop_dispatcher()
        self._service.stop()

    def __enter__(self) -> "BrokerServer":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()
