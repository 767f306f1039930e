#!/usr/bin/env python3
"""End-to-end check over real sockets: simulator feeds two pipelines, the
broker notifies the engine, and the engine's numbers land back in the broker.

Runs the bundled demo turnaround at 600x and expects the taxi and
turnaround durations to come out exactly 300/1800/300 seconds.
"""
import datetime as dt
import sys
import time

from aerotwin.broker import BrokerClient, BrokerServer, ContextBroker
from aerotwin.engine import EngineService
from aerotwin.feeds import RestPoller, TcpStreamClient
from aerotwin.model import make_entity_id, timefmt
from aerotwin.pipeline import (
    Pipeline,
    chroma_pipeline_config,
    positions_pipeline_config,
)
from aerotwin.sim import SimClock, SimulatorServer
from aerotwin.sim.scenario import demo_turnaround_script

FLIGHT_IN = make_entity_id("Flight", "1")
FLIGHT_OUT = make_entity_id("Flight", "2")
AIRCRAFT = make_entity_id("Aircraft", "OYAAA")


def wait_for(describe, predicate, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value is not None:
            print(f"PASS {describe}")
            return value
        time.sleep(0.05)
    print(f"FAIL {describe} (timed out after {timeout}s)")
    sys.exit(1)


def main() -> None:
    script = demo_turnaround_script()
    clock = SimClock(script.start, scale=600.0)

    sim = SimulatorServer(script, clock, tick_seconds=60.0)
    sim.start()
    broker = BrokerServer(ContextBroker(), dispatch="thread")
    broker.start()
    engine = EngineService(broker.url, airport_iata=script.airport_iata)
    engine.start()
    client = BrokerClient(broker.url)

    chroma = Pipeline(chroma_pipeline_config(broker.url))
    positions = Pipeline(positions_pipeline_config(broker.url))
    poller = RestPoller(sim.schedule_url, interval_seconds=0.05,
                        emit=chroma.feed, source_name="chroma")
    stream = TcpStreamClient(*sim.tcp_address, emit=positions.feed,
                             source_name="planefinder")
    poller.start()
    stream.start()

    try:
        wait_for("schedule feed creates the inbound flight",
                 lambda: client.get_or_none(FLIGHT_IN))
        wait_for("position feed creates the aircraft",
                 lambda: client.get_or_none(AIRCRAFT))

        def axit():
            entity = client.get_or_none(FLIGHT_IN)
            value = entity and entity.attr_value("dateAXIT")
            return value if value == 300.0 else None
        wait_for("engine derives a 300 s taxi-in", axit, timeout=60.0)

        def attt():
            entity = client.get_or_none(FLIGHT_OUT)
            value = entity and entity.attr_value("dateATTT")
            return value if value == 1800.0 else None
        wait_for("engine links a 1800 s turnaround", attt, timeout=60.0)

        aobt = client.get(FLIGHT_OUT).attr_value("dateAOBT")
        atot_at = aobt + dt.timedelta(seconds=300)
        import requests
        response = requests.post(
            f"{engine.url}/flights/{FLIGHT_OUT}/milestones",
            json={"milestone": "ATOT", "at": timefmt.format_wire(atot_at)},
            timeout=10)
        if response.status_code != 200:
            print(f"FAIL tower milestone rejected: {response.text}")
            sys.exit(1)
        print("PASS tower milestone accepted")

        def axot():
            entity = client.get_or_none(FLIGHT_OUT)
            value = entity and entity.attr_value("dateAXOT")
            return value if value == 300.0 else None
        wait_for("engine derives a 300 s taxi-out", axot, timeout=60.0)

        snapshot = client.metrics()
        print(f"broker entities={snapshot['entities']} "
              f"changeEvents={snapshot['changeEvents']} "
              f"delivered={snapshot['notificationsDelivered']} "
              f"dropped={snapshot['notificationsDropped']}")
        if snapshot["notificationsDropped"]:
            print("FAIL notifications were dropped")
            sys.exit(1)
        print("PASS end-to-end check complete")
    finally:
        poller.stop()
        stream.stop()
        engine.stop()
        broker.stop()
        sim.stop()


if __name__ == "__main__":
    main()
