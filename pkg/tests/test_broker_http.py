"""Broker HTTP API: statuses, query-string parsing, end-to-end delivery."""
from __future__ import annotations

import datetime as dt

import pytest
import requests

from aerotwin.broker import (
    BrokerApiError,
    BrokerClient,
    BrokerError,
    BrokerServer,
    ContextBroker,
    parse_query_expression,
)
from aerotwin.model import Attribute, ContextEntity, PROPERTY, make_entity_id, timefmt

from stubs import CaptureEndpoint

T0 = dt.datetime(2021, 2, 4, 16, 0, 0, tzinfo=timefmt.UTC)


def telemetry(key: str, **values) -> dict:
    entity = ContextEntity(
        make_entity_id("Telemetry", key), "Telemetry",
        {name: Attribute(PROPERTY, value) for name, value in values.items()})
    return entity.to_document()


@pytest.fixture()
def server():
    with BrokerServer(ContextBroker(clock=lambda: T0, retry_backoff=0.01),
                      dispatch="manual") as srv:
        yield srv


@pytest.fixture()
def client(server):
    return BrokerClient(server.url)


class TestEntityRoutes:
    def test_create_is_201_then_update_is_200(self, server):
        doc = telemetry("a", speed=1.0)
        first = requests.post(f"{server.url}/entities", json=doc, timeout=5)
        second = requests.post(f"{server.url}/entities", json=doc, timeout=5)
        assert first.status_code == 201
        assert first.json() == {"result": "created"}
        assert second.status_code == 200
        assert second.json() == {"result": "updated"}

    def test_get_round_trip(self, client):
        client.upsert(telemetry("a", speed=12.5, label="x"))
        entity = client.get("urn:ngsi-ld:Telemetry:telemetry-a")
        assert entity.attr_value("speed") == 12.5
        assert entity.attr_value("label") == "x"

    def test_get_missing_is_404(self, client):
        with pytest.raises(BrokerApiError) as err:
            client.get("urn:ngsi-ld:Telemetry:telemetry-none")
        assert err.value.status == 404
        assert client.get_or_none("urn:ngsi-ld:Telemetry:telemetry-none") is None

    def test_invalid_entity_is_400_with_violations(self, server):
        response = requests.post(
            f"{server.url}/entities",
            json={"id": "urn:ngsi-ld:Flight:flight-x", "type": "Flight",
                  "state": {"value": "flying", "type": "Property"}},
            timeout=5)
        assert response.status_code == 400
        assert response.json()["violations"]

    def test_body_that_is_not_json_is_400(self, server):
        response = requests.post(
            f"{server.url}/entities", data=b"{nope",
            headers={"Content-Type": "application/json"}, timeout=5)
        assert response.status_code == 400

    def test_delete_then_404(self, client, server):
        client.upsert(telemetry("a", speed=1.0))
        client.delete("urn:ngsi-ld:Telemetry:telemetry-a")
        response = requests.delete(
            f"{server.url}/entities/urn:ngsi-ld:Telemetry:telemetry-a",
            timeout=5)
        assert response.status_code == 404

    def test_unknown_route_is_404(self, server):
        assert requests.get(f"{server.url}/nope", timeout=5).status_code == 404
        assert requests.post(f"{server.url}/entities/a/b", json={},
                             timeout=5).status_code == 404


class TestQueryRoutes:
    def seed(self, client):
        for i in range(12):
            client.upsert(telemetry(
                f"t{i:02d}", speed=float(i),
                issued=T0 + dt.timedelta(minutes=10 * i)))

    def test_q_filters(self, client):
        self.seed(client)
        got = client.query("Telemetry", q="speed>=3;speed<6")
        assert [e.attr_value("speed") for e in got] == [3.0, 4.0, 5.0]

    def test_between_window_inclusive(self, client):
        self.seed(client)
        got = client.query(
            "Telemetry", timerel="between", timeproperty="issued",
            time_at=T0 + dt.timedelta(minutes=20),
            end_time_at=T0 + dt.timedelta(minutes=40))
        assert [e.attr_value("speed") for e in got] == [2.0, 3.0, 4.0]

    def test_after_and_before(self, client):
        self.seed(client)
        after = client.query("Telemetry", timerel="after",
                             timeproperty="issued",
                             time_at=T0 + dt.timedelta(minutes=100))
        before = client.query("Telemetry", timerel="before",
                              timeproperty="issued",
                              time_at=T0 + dt.timedelta(minutes=10))
        assert [e.attr_value("speed") for e in after] == [10.0, 11.0]
        assert [e.attr_value("speed") for e in before] == [0.0, 1.0]

    def test_query_without_type_is_400(self, server):
        response = requests.get(f"{server.url}/entities", timeout=5)
        assert response.status_code == 400

    def test_bad_constraint_is_400(self, server):
        response = requests.get(
            f"{server.url}/entities",
            params={"type": "Telemetry", "q": "speed!=3"}, timeout=5)
        assert response.status_code == 400

    def test_unknown_timerel_is_400(self, server):
        response = requests.get(
            f"{server.url}/entities",
            params={"type": "Telemetry", "timerel": "during",
                    "timeproperty": "issued",
                    "timeAt": "2021-02-04T16:00:00.00Z"},
            timeout=5)
        assert response.status_code == 400

    def test_between_without_end_is_400(self, server):
        response = requests.get(
            f"{server.url}/entities",
            params={"type": "Telemetry", "timerel": "between",
                    "timeproperty": "issued",
                    "timeAt": "2021-02-04T16:00:00.00Z"},
            timeout=5)
        assert response.status_code == 400


class TestQueryExpressionParsing:
    def test_all_comparators(self):
        got = parse_query_expression("a==1;b<2;c>3;d<=4;e>=5")
        assert got == [("a", "eq", "1"), ("b", "lt", "2"), ("c", "gt", "3"),
                       ("d", "le", "4"), ("e", "ge", "5")]

    def test_datetime_value_survives(self):
        got = parse_query_expression("dateScheduled>=2021-02-04T16:00:00.00Z")
        assert got == [("dateScheduled", "ge", "2021-02-04T16:00:00.00Z")]

    def test_garbage_rejected(self):
        with pytest.raises(BrokerError):
            parse_query_expression("just words")


class TestSubscriptionRoutes:
    def test_subscription_lifecycle(self, client):
        with CaptureEndpoint() as sink:
            sub_id = client.subscribe("Telemetry", sink.url,
                                      watched_attributes=["speed"])
            assert sub_id == "sub-1"
            listed = client.subscriptions()
            assert listed[0]["entityTypeFilter"] == "Telemetry"
            assert listed[0]["watchedAttributes"] == ["speed"]
            client.unsubscribe(sub_id)
            assert client.subscriptions() == []

    def test_bad_endpoint_is_400(self, client):
        with pytest.raises(BrokerApiError) as err:
            client.subscribe("Telemetry", "ftp://wrong")
        assert err.value.status == 400

    def test_live_dispatch_end_to_end(self):
        broker = ContextBroker(clock=lambda: T0, retry_backoff=0.01)
        with BrokerServer(broker, dispatch="thread") as srv, \
                CaptureEndpoint() as sink:
            client = BrokerClient(srv.url)
            client.subscribe("Telemetry", sink.url)
            for i in range(5):
                client.upsert(telemetry("a", speed=float(i)))
            assert sink.wait_for(5, timeout=10)
            metrics = client.metrics()
        assert metrics["notificationsDelivered"] == 5
        assert metrics["changeEvents"] == 5

    def test_health_and_metrics(self, client):
        assert client.health() is True
        metrics = client.metrics()
        assert metrics["entities"] == 0
        assert metrics["subscriptions"] == 0
