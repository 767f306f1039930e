"""History service: a broker subscriber that feeds the append-only store,
plus the read API for time-range queries."""
from __future__ import annotations

import datetime as _dt
import json
import logging
from typing import Optional
from urllib.parse import parse_qs, unquote, urlparse

from ..broker import BrokerClient
from ..model import timefmt
from ..webutil import HttpService, JsonHandler
from .store import HistoryError, HistoryStore

log = logging.getLogger(__name__)


class HistoryService:
    def __init__(self, store: HistoryStore, broker_url: Optional[str] = None,
                 host: str = "127.0.0.1", port: int = 0):
        self.store = store
        self.client = BrokerClient(broker_url) if broker_url else None
        self._subscription_id: Optional[str] = None
        self.notifications_received = 0
        self._service = HttpService(HistoryHandler, host=host, port=port,
                                    history=self)

    @property
    def url(self) -> str:
        return self._service.url

    def start(self, subscribe: bool = True) -> "HistoryService":
        self._service.start()
        if subscribe and self.client is not None:
            self._subscription_id = self.client.subscribe(
                "*", f"{self.url}/events")
        return self

    def stop(self) -> None:
        if self._subscription_id is not None and self.client is not None:
            try:
                self.client.unsubscribe(self._subscription_id)
            except Exception:  # noqa: BLE001 - broker may be gone already
                log.debug("unsubscribe on shutdown failed", exc_info=True)
            self._subscription_id = None
        self._service.stop()

    def __enter__(self) -> "HistoryService":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def record_notification(self, payload: dict) -> list[int]:
        """Store every snapshot in a notification; recordedAt is the
        broker's notifiedAt so replay timestamps match broker time."""
        recorded_at = timefmt.parse_wire(payload["notifiedAt"])
        sequences = []
        for document in payload.get("data", ()):
            sequence = self.store.record_snapshot(document, recorded_at)
            if sequence is not None:
                sequences.append(sequence)
        self.notifications_received += 1
        return sequences

    def metrics_snapshot(self) -> dict:
        return {
            "events": len(self.store),
            "lastSequence": self.store.last_sequence,
            "entities": len(self.store.entity_ids()),
            "notificationsReceived": self.notifications_received,
            "duplicatesSkipped": self.store.duplicates_skipped,
        }


def _parse_bound(params: dict[str, list[str]], name: str
                 ) -> Optional[_dt.datetime]:
    raw = params.get(name, [None])[0]
    if raw is None or raw == "":
        return None
    return timefmt.parse_wire(raw)


class HistoryHandler(JsonHandler):
    @property
    def history(self) -> HistoryService:
        return self.server.history  # type: ignore[attr-defined]

    def do_POST(self) -> None:
        parsed = urlparse(self.path)
        if parsed.path != "/events":
            self.send_json(404, {"error": f"no route POST {parsed.path}"})
            return
        try:
            payload = self.read_json() or {}
            sequences = self.history.record_notification(payload)
        except json.JSONDecodeError as exc:
            self.send_json(400, {"error": f"body is not JSON: {exc}"})
        except (HistoryError, KeyError, ValueError) as exc:
            self.send_json(400, {"error": str(exc)})
        except OSError:
            # storage failure: refuse the event so the broker retries it
            log.exception("history append failed")
            self.send_json(503, {"error": "storage failure, retry"})
        else:
            self.send_json(200, {"status": "accepted",
                                 "sequences": sequences})

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        segments = [unquote(s) for s in parsed.path.split("/") if s]
        if segments == ["health"]:
            self.send_json(200, {"status": "ok"})
            return
        if segments == ["metrics"]:
            self.send_json(200, self.history.metrics_snapshot())
            return
        if segments == ["history"]:
            self.send_json(200, {
                "entities": self.history.store.entity_ids(),
                "lastSequence": self.history.store.last_sequence,
                "events": len(self.history.store),
            })
            return
        if len(segments) == 2 and segments[0] == "history":
            params = parse_qs(parsed.query)
            try:
                from_at = _parse_bound(params, "from")
                to_at = _parse_bound(params, "to")
                events = self.history.store.query(segments[1], from_at,
                                                  to_at)
            except ValueError as exc:
                self.send_json(400, {"error": str(exc)})
                return
            self.send_json(200, {
                "entityId": segments[1],
                "events": [event.to_document() for event in events],
            })
            return
        self.send_json(404, {"error": f"no route GET {parsed.path}"})
