"""Feed adapters: REST polling and the framed TCP stream client."""
from __future__ import annotations

import datetime as dt
import socket
import struct
import threading
import time

import pytest

from aerotwin.feeds import RestPoller, TcpStreamClient
from aerotwin.model import timefmt
from aerotwin.sim import SimClock, SimulatorServer, TOKEN_HEADER, feedgen
from aerotwin.sim.scenario import generate_scenario
from aerotwin.webutil import HttpService, JsonHandler

from test_sim import listing_arrival_script

START = dt.datetime(2021, 2, 4, 17, 20, tzinfo=timefmt.UTC)


class FrameServer:
    """Sends a scripted batch of raw messages per accepted connection."""

    def __init__(self, batches: list[list[bytes]]):
        self._batches = batches
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(4)
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self.connections = 0

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()

    def _serve(self) -> None:
        for batch in self._batches:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            self.connections += 1
            try:
                for message in batch:
                    conn.sendall(message)
                    time.sleep(0.002)
            except OSError:
                pass
            finally:
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                conn.close()

    def __enter__(self) -> "FrameServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._listener.close()
        self._thread.join(timeout=5)


def wait_until(check, timeout: float = 10.0) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if check():
            return True
        time.sleep(0.02)
    return check()


def numbered_message(n: int) -> bytes:
    return feedgen.frame_message({"seq": {"adshex": "X", "pos_update_time": n}})


class TestRestPoller:
    def test_static_schedule_gives_identical_payloads_distinct_sequences(self):
        script = listing_arrival_script()
        clock = SimClock(START, manual=True)  # frozen: never advanced
        records = []
        with SimulatorServer(script, clock) as sim:
            poller = RestPoller(sim.schedule_url, 0.02, records.append,
                                source_name="chroma").start()
            try:
                assert wait_until(lambda: len(records) >= 5)
            finally:
                poller.stop()
        payloads = [r.payload for r in records[:5]]
        assert all(p == payloads[0] for p in payloads)
        assert [r.sequence[0] for r in records[:5]] == [0, 1, 2, 3, 4]
        assert poller.failures == 0

    def test_failed_tick_counts_and_next_tick_recovers(self):
        class Flaky(JsonHandler):
            def do_GET(self):
                server = self.server
                server.calls += 1  # type: ignore[attr-defined]
                if server.calls == 1:  # type: ignore[attr-defined]
                    self.send_json(500, {"error": "warming up"})
                else:
                    self.send_json(200, [])

        records = []
        with HttpService(Flaky, calls=0) as service:
            poller = RestPoller(service.url, 0.02, records.append)
            assert poller.poll_once() is None
            assert poller.failures == 1
            assert poller.poll_once() is not None
        assert len(records) == 1
        assert records[0].payload == []

    def test_unreachable_endpoint_only_counts_failure(self):
        poller = RestPoller("http://127.0.0.1:9/flights", 0.02,
                            lambda r: None, timeout=0.2)
        assert poller.poll_once() is None
        assert poller.failures == 1

    def test_token_checked_when_configured(self):
        script = listing_arrival_script()
        clock = SimClock(START, manual=True)
        records = []
        with SimulatorServer(script, clock, token="sesame") as sim:
            bare = RestPoller(sim.schedule_url, 0.02, records.append)
            assert bare.poll_once() is None
            assert bare.failures == 1
            keyed = RestPoller(sim.schedule_url, 0.02, records.append,
                               headers={TOKEN_HEADER: "sesame"})
            assert keyed.poll_once() is not None
        assert len(records) == 1

    def test_interval_must_be_positive(self):
        with pytest.raises(ValueError):
            RestPoller("http://127.0.0.1:1/x", 0, lambda r: None)


class TestTcpStreamClient:
    def collect(self, batches, expect, **kwargs):
        records = []
        with FrameServer(batches) as server:
            host, port = server.address
            client = TcpStreamClient(host, port, records.append,
                                     reconnect_backoff=0.02, **kwargs).start()
            try:
                assert wait_until(lambda: len(records) >= expect)
            finally:
                client.stop()
            return records, client, server

    def test_single_frame_delivers_payload(self, planefinder_frame):
        message = feedgen.frame_message(planefinder_frame)
        records, client, _ = self.collect([[message]], expect=1)
        assert records[0].payload == planefinder_frame
        assert records[0].sequence == (0,)
        assert client.corrupt_frames == 0

    def test_corrupt_frame_dropped_stream_continues(self):
        garbage = b"\x00\x00\x00\x0bnot-gzip!!!"
        batch = [numbered_message(0), garbage, numbered_message(1)]
        records, client, _ = self.collect([batch], expect=2)
        assert [r.payload["seq"]["pos_update_time"] for r in records[:2]] == [0, 1]
        assert client.corrupt_frames == 1

    def test_hundred_frames_across_reconnect(self):
        batches = [[numbered_message(n) for n in range(50)],
                   [numbered_message(n) for n in range(50, 100)]]
        records, client, server = self.collect(batches, expect=100)
        seen = [r.payload["seq"]["pos_update_time"] for r in records]
        assert seen == sorted(seen)  # no corruption, order preserved
        assert set(seen) == set(range(100))  # no gaps outside the outage
        assert client.connections == 2
        assert server.connections == 2

    def test_connection_refused_retries_until_server_appears(self):
        records = []
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.bind(("127.0.0.1", 0))
        host, port = probe.getsockname()
        probe.close()  # nothing listening yet; connects get refused
        client = TcpStreamClient(host, port, records.append,
                                 reconnect_backoff=0.02).start()
        try:
            time.sleep(0.15)  # let several refused attempts happen
            late = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            late.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            late.settimeout(10)
            late.bind((host, port))
            late.listen(1)
            conn, _ = late.accept()  # a retry eventually lands here
            conn.sendall(numbered_message(7))
            assert wait_until(lambda: len(records) == 1)
            conn.close()
            late.close()
        finally:
            client.stop()
        assert records[0].payload["seq"]["pos_update_time"] == 7

    def test_stream_from_simulator_server(self):
        script = generate_scenario(4, pairs=2)
        first_airborne = min(
            f.scheduled_offset + f.track.airborne_from
            for f in script.flights if f.track is not None)
        clock = SimClock(script.start, scale=600.0, manual=False)
        # jump the scenario clock into the middle of the first flight
        clock.start = script.start + dt.timedelta(seconds=first_airborne + 120)
        records = []
        with SimulatorServer(script, clock, tick_seconds=30.0) as sim:
            host, port = sim.tcp_address
            client = TcpStreamClient(host, port, records.append,
                                     reconnect_backoff=0.05).start()
            try:
                assert wait_until(
                    lambda: any(r.payload for r in records), timeout=15)
            finally:
                client.stop()
        populated = [r for r in records if r.payload]
        state = next(iter(populated[0].payload.values()))
        assert {"reg", "flight_number", "adshex", "lat", "lon", "altitude",
                "heading", "speed", "vert_rate", "is_on_ground",
                "pos_update_time", "route"} <= set(state)
