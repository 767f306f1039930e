"""Requests-based client for the broker HTTP API."""
from __future__ import annotations

import datetime as _dt
from typing import Any, Iterable, Mapping

import requests

from ..model import ContextEntity, parse_entity, serialize_entity, timefmt


class BrokerApiError(Exception):
    def __init__(self, status: int, payload: Any):
        message = payload.get("error") if isinstance(payload, dict) else str(payload)
        super().__init__(f"{status}: {message}")
        self.status = status
        self.payload = payload


class BrokerClient:
    def __init__(self, base_url: str, session: requests.Session | None = None,
                 timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self._session = session or requests.Session()
        self.timeout = timeout

    def _check(self, response: requests.Response) -> Any:
        body: Any = None
        if response.content:
            try:
                body = response.json()
            except ValueError:
                body = response.text
        if response.status_code >= 400:
            raise BrokerApiError(response.status_code, body)
        return body

    def upsert(self, entity: ContextEntity | Mapping) -> str:
        document = serialize_entity(entity) if isinstance(entity, ContextEntity) \
            else entity
        body = self._check(self._session.post(
            f"{self.base_url}/entities", json=document, timeout=self.timeout))
        return body["result"]

    def get(self, entity_id: str) -> ContextEntity:
        body = self._check(self._session.get(
            f"{self.base_url}/entities/{entity_id}", timeout=self.timeout))
        return parse_entity(body)

    def get_or_none(self, entity_id: str) -> ContextEntity | None:
        try:
            return self.get(entity_id)
        except BrokerApiError as exc:
            if exc.status == 404:
                return None
            raise

    def query(self, entity_type: str, q: str | None = None,
              timerel: str | None = None, timeproperty: str | None = None,
              time_at: _dt.datetime | str | None = None,
              end_time_at: _dt.datetime | str | None = None,
              ) -> list[ContextEntity]:
        params: dict[str, str] = {"type": entity_type}
        if q:
            params["q"] = q
        if timerel:
            params["timerel"] = timerel
            if timeproperty:
                params["timeproperty"] = timeproperty
            if time_at is not None:
                params["timeAt"] = _wire(time_at)
            if end_time_at is not None:
                params["endTimeAt"] = _wire(end_time_at)
        body = self._check(self._session.get(
            f"{self.base_url}/entities", params=params, timeout=self.timeout))
        return [parse_entity(doc) for doc in body]

    def delete(self, entity_id: str) -> None:
        self._check(self._session.delete(
            f"{self.base_url}/entities/{entity_id}", timeout=self.timeout))

    def subscribe(self, entity_type_filter: str, notification_endpoint: str,
                  watched_attributes: Iterable[str] = (),
                  entity_id_filter: str | None = None) -> str:
        body = self._check(self._session.post(
            f"{self.base_url}/subscriptions",
            json={
                "entityTypeFilter": entity_type_filter,
                "notificationEndpoint": notification_endpoint,
                "watchedAttributes": list(watched_attributes),
                "entityIdFilter": entity_id_filter,
            },
            timeout=self.timeout))
        return body["id"]

    def unsubscribe(self, sub_id: str) -> None:
        self._check(self._session.delete(
            f"{self.base_url}/subscriptions/{sub_id}", timeout=self.timeout))

    def subscriptions(self) -> list[dict]:
        return self._check(self._session.get(
            f"{self.base_url}/subscriptions", timeout=self.timeout))

    def metrics(self) -> dict:
        return self._check(self._session.get(
            f"{self.base_url}/metrics", timeout=self.timeout))

    def health(self) -> bool:
        try:
            return self._check(self._session.get(
                f"{self.base_url}/health", timeout=self.timeout,
            ))["status"] == "ok"
        except (requests.RequestException, BrokerApiError, KeyError):
            return False


def _wire(value: _dt.datetime | str) -> str:
    if isinstance(value, _dt.datetime):
        return timefmt.format_wire(value)
    return value
