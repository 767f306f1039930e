"""Simulator: clock, geometry, scripts, schedule documents, position frames."""
from __future__ import annotations

import datetime as dt
import threading
import time

import pytest

from aerotwin.model import timefmt
from aerotwin.sim import (
    AIRPORTS,
    ScenarioScript,
    ScriptedFlight,
    SimClock,
    TrackPlan,
    demo_turnaround_script,
    feedgen,
    generate_scenario,
    geo,
    load_script,
    save_script,
    validate_script,
)
from aerotwin.sim.scenario import KN_TO_MS

START = dt.datetime(2021, 2, 4, 17, 20, tzinfo=timefmt.UTC)


def listing_arrival_script() -> ScenarioScript:
    """The one-arrival day the schedule feed fixture comes from."""
    return ScenarioScript(
        seed=1, airport_iata="ABZ", start=START,
        flights=[ScriptedFlight(
            flight_number="1234", airline_iata="SK", direction="A",
            other_airport_iata="SVG", other_airport_icao="ENZV",
            registration="AAAAA", adshex="ADF001", stand_code="01",
            gate_code="01", scheduled_offset=0.0,
            milestones={"AIBT": 0.0})])


class TestSimClock:
    def test_manual_clock_only_moves_on_advance(self):
        clock = SimClock(START, manual=True)
        assert clock.now() == START
        clock.advance(90)
        assert clock.now() == START + dt.timedelta(seconds=90)
        assert clock.elapsed() == 90.0

    def test_manual_advance_rejects_negative(self):
        clock = SimClock(START, manual=True)
        with pytest.raises(ValueError):
            clock.advance(-1)

    def test_advance_requires_manual_mode(self):
        with pytest.raises(RuntimeError):
            SimClock(START).advance(10)

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            SimClock(START, scale=0)

    def test_scaled_clock_runs_faster_than_wall(self):
        clock = SimClock(START, scale=1000.0)
        time.sleep(0.05)
        assert clock.elapsed() >= 10.0

    def test_manual_sleep_wakes_on_advance(self):
        clock = SimClock(START, manual=True)
        woke = threading.Event()

        def sleeper():
            clock.sleep(60)
            woke.set()

        thread = threading.Thread(target=sleeper, daemon=True)
        thread.start()
        assert not woke.wait(timeout=0.2)
        clock.advance(60)
        assert woke.wait(timeout=5)
        thread.join(timeout=5)


class TestGeo:
    ABZ = AIRPORTS["ABZ"][1:]
    SVG = AIRPORTS["SVG"][1:]

    def test_distance_is_symmetric_and_sane(self):
        d = geo.distance_m(self.ABZ, self.SVG)
        assert d == pytest.approx(geo.distance_m(self.SVG, self.ABZ))
        assert 400_000 < d < 520_000  # roughly 250nm across the North Sea

    def test_zero_distance(self):
        assert geo.distance_m(self.ABZ, self.ABZ) == 0.0

    def test_bearing_in_range(self):
        bearing = geo.initial_bearing_deg(self.ABZ, self.SVG)
        assert 0 <= bearing < 360
        assert 40 < bearing < 90  # Stavanger is northeast across the water

    def test_intermediate_endpoints(self):
        assert geo.intermediate_point(self.ABZ, self.SVG, 0) == self.ABZ
        assert geo.intermediate_point(self.ABZ, self.SVG, 1) == self.SVG

    def test_midpoint_splits_distance_evenly(self):
        mid = geo.intermediate_point(self.ABZ, self.SVG, 0.5)
        first = geo.distance_m(self.ABZ, mid)
        second = geo.distance_m(mid, self.SVG)
        assert first == pytest.approx(second, rel=1e-9)

    def test_polyline_position_clamps(self):
        waypoints = [self.ABZ, self.SVG]
        lat, lon, _ = geo.polyline_position(waypoints, -5.0)
        assert (lat, lon) == self.ABZ
        total = geo.polyline_length_m(waypoints)
        lat, lon, _ = geo.polyline_position(waypoints, total * 2)
        assert (lat, lon) == self.SVG

    def test_polyline_needs_two_points(self):
        with pytest.raises(ValueError):
            geo.polyline_position([self.ABZ], 10.0)


class TestServeSchedule:
    def test_empty_script_serves_empty_array(self):
        script = ScenarioScript(seed=0, airport_iata="ABZ", start=START)
        assert feedgen.serve_schedule(script, START) == []

    def test_reproduces_schedule_feed_fixture(self, chroma_feed):
        script = listing_arrival_script()
        assert feedgen.serve_schedule(script, START) == chroma_feed

    def test_before_any_milestone_only_schedule_is_set(self):
        script = listing_arrival_script()
        early = feedgen.serve_schedule(script, START - dt.timedelta(hours=2))
        flight = early[1]
        assert flight["ScheduledDateTime"] == "2021-02-04T17:20:00+00:00"
        assert all(flight[f] is None for f in ("ALDT", "AIBT", "AOBT", "TOBT"))

    def test_unscripted_milestone_never_fills(self):
        script = listing_arrival_script()  # no ALDT scripted at all
        late = feedgen.serve_schedule(script, START + dt.timedelta(days=2))
        assert late[1]["ALDT"] is None
        assert late[1]["AIBT"] == "2021-02-04T17:20:00+00:00"

    def test_milestones_fill_monotonically_and_never_change(self):
        script = generate_scenario(11, pairs=3)
        seen: dict[tuple[int, str], str] = {}
        for minutes in range(0, 10 * 60, 7):
            at = script.start + dt.timedelta(minutes=minutes)
            for record in feedgen.serve_schedule(script, at)[1:]:
                for name in ("ALDT", "AIBT", "AOBT", "TOBT"):
                    value = record[name]
                    key = (record["id"], name)
                    if key in seen:
                        assert value == seen[key], "milestone reverted"
                    elif value is not None:
                        seen[key] = value
        assert seen  # the scan actually crossed some milestones

    def test_null_record_leads_every_non_empty_response(self):
        script = generate_scenario(3, pairs=2)
        records = feedgen.serve_schedule(script, script.start)
        assert records[0]["id"] == 0
        assert all(v is None for k, v in records[0].items() if k != "id")
        assert [r["id"] for r in records[1:]] == [1, 2, 3, 4]

    def test_identical_inputs_identical_output(self):
        at = START + dt.timedelta(hours=3)
        first = feedgen.serve_schedule(generate_scenario(42), at)
        second = feedgen.serve_schedule(generate_scenario(42), at)
        assert first == second


class TestPositionFrames:
    def two_point_flight(self, speed_kn: float = 300.0):
        a = AIRPORTS["SVG"][1:]
        b = AIRPORTS["ABZ"][1:]
        seconds = geo.distance_m(a, b) / (speed_kn * KN_TO_MS)
        flight = ScriptedFlight(
            flight_number="1234", airline_iata="SK", direction="A",
            other_airport_iata="SVG", other_airport_icao="ENZV",
            registration="AA-AAAA", adshex="ADF001", stand_code="01",
            gate_code="01", scheduled_offset=0.0,
            milestones={"ALDT": 0.0, "AIBT": 300.0},
            track=TrackPlan(waypoints=[a, b], speed_kn=speed_kn,
                            airborne_from=-seconds, airborne_until=0.0,
                            cruise_altitude_ft=20000.0,
                            climb_rate_ftmin=2000.0))
        return ScenarioScript(seed=0, airport_iata="ABZ", start=START,
                              flights=[flight]), seconds

    def test_midpoint_at_half_the_leg_time(self):
        script, seconds = self.two_point_flight()
        at = START + dt.timedelta(seconds=-seconds / 2)
        frame = feedgen.frame_at(script, at)
        state = frame["ADF001"]
        a = AIRPORTS["SVG"][1:]
        b = AIRPORTS["ABZ"][1:]
        expected = geo.intermediate_point(a, b, 0.5)
        assert state["lat"] == pytest.approx(expected[0], abs=1e-5)
        assert state["lon"] == pytest.approx(expected[1], abs=1e-5)
        assert state["speed"] == 300
        assert state["is_on_ground"] is False
        assert state["route"] == "SVG-ABZ"
        assert state["flight_number"] == "SK1234"

    def test_outside_window_is_empty_frame(self):
        script, seconds = self.two_point_flight()
        before = feedgen.frame_at(
            script, START - dt.timedelta(seconds=seconds + 60))
        after = feedgen.frame_at(script, START + dt.timedelta(seconds=60))
        assert before == {}
        assert after == {}

    def test_on_ground_exactly_when_altitude_zero(self):
        script, seconds = self.two_point_flight()
        for fraction in (0.0, 0.1, 0.5, 0.9, 1.0):
            at = START + dt.timedelta(seconds=-seconds * (1 - fraction))
            state = feedgen.frame_at(script, at)["ADF001"]
            assert state["is_on_ground"] == (state["altitude"] == 0)

    def test_speed_never_exceeds_script(self):
        script = generate_scenario(5, pairs=3)
        step = 30.0
        previous: dict[str, tuple[dt.datetime, float, float]] = {}
        samples = 0
        for k in range(0, 2000):
            at = script.start + dt.timedelta(seconds=k * step)
            for adshex, state in feedgen.frame_at(script, at).items():
                if adshex in previous:
                    last_at, lat, lon = previous[adshex]
                    dt_s = (at - last_at).total_seconds()
                    moved = geo.distance_m((lat, lon),
                                           (state["lat"], state["lon"]))
                    limit = state["speed"] * KN_TO_MS * dt_s + 1.0
                    assert moved <= limit
                    samples += 1
                previous[adshex] = (at, state["lat"], state["lon"])
        assert samples > 50

    def test_vertical_profile_climbs_cruises_descends(self):
        script, seconds = self.two_point_flight()
        climb = feedgen.frame_at(
            script, START + dt.timedelta(seconds=-seconds + 60))["ADF001"]
        cruise = feedgen.frame_at(
            script, START + dt.timedelta(seconds=-seconds / 2))["ADF001"]
        descent = feedgen.frame_at(
            script, START - dt.timedelta(seconds=60))["ADF001"]
        assert climb["vert_rate"] == 2000
        assert cruise["vert_rate"] == 0
        assert cruise["altitude"] == 20000
        assert descent["vert_rate"] == -2000

    def test_frame_bytes_are_repeatable(self):
        script = generate_scenario(9, pairs=2)
        ticks = [script.start + dt.timedelta(seconds=30 * k)
                 for k in range(200)]

        def run() -> list[bytes]:
            return [feedgen.frame_message(feedgen.frame_at(script, t))
                    for t in ticks]

        assert run() == run()

    def test_frame_message_round_trips(self):
        script, seconds = self.two_point_flight()
        frame = feedgen.frame_at(script, START - dt.timedelta(seconds=60))
        message = feedgen.frame_message(frame)
        length = int.from_bytes(message[:4], "big")
        assert len(message) == 4 + length
        assert feedgen.decode_frame(message[4:]) == frame


class TestScenarioScripts:
    def test_generate_is_deterministic_per_seed(self):
        assert generate_scenario(21).to_document() == \
            generate_scenario(21).to_document()
        assert generate_scenario(21).to_document() != \
            generate_scenario(22).to_document()

    def test_generated_scenarios_validate(self):
        for seed in range(6):
            assert validate_script(generate_scenario(seed, pairs=4)) == []

    def test_generated_pairs_share_registration(self):
        script = generate_scenario(3, pairs=3)
        assert len(script.flights) == 6
        for i in range(0, 6, 2):
            inbound, outbound = script.flights[i], script.flights[i + 1]
            assert inbound.direction == "A"
            assert outbound.direction == "D"
            assert inbound.registration == outbound.registration
            assert "-" in inbound.registration

    def test_json_round_trip(self, tmp_path):
        script = generate_scenario(13, pairs=2)
        path = tmp_path / "scenario.json"
        save_script(script, path)
        loaded = load_script(path)
        assert loaded.to_document() == script.to_document()
        at = script.start + dt.timedelta(hours=1)
        assert feedgen.serve_schedule(loaded, at) == \
            feedgen.serve_schedule(script, at)

    def test_validation_catches_problems(self):
        script = generate_scenario(1, pairs=1)
        script.flights[1].flight_number = script.flights[0].flight_number
        script.flights[0].milestones = {"ALDT": 100.0, "AIBT": 50.0}
        script.flights[1].track.waypoints = [script.flights[1].track.waypoints[0]]
        problems = validate_script(script)
        assert any("duplicate flight number" in p for p in problems)
        assert any("AOBT <= ATOT <= ALDT <= AIBT" in p for p in problems)
        assert any("two waypoints" in p for p in problems)

    def test_demo_turnaround_numbers(self):
        script = demo_turnaround_script()
        assert validate_script(script) == []
        inbound, outbound = script.flights
        aibt = inbound.milestone_at(script.start, "AIBT")
        aldt = inbound.milestone_at(script.start, "ALDT")
        aobt = outbound.milestone_at(script.start, "AOBT")
        atot = outbound.milestone_at(script.start, "ATOT")
        assert (aibt - aldt).total_seconds() == 300.0
        assert (aobt - aibt).total_seconds() == 1800.0
        assert (atot - aobt).total_seconds() == 300.0
