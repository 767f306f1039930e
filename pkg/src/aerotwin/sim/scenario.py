"""Scenario scripts: the scripted day of traffic a simulator run serves.

A script fixes every flight, milestone offset, and track up front, so two
runs from the same script and clock schedule produce identical feeds.
"""
from __future__ import annotations

import datetime as _dt
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..model import timefmt
from . import geo

# offsets are seconds relative to the flight's scheduled time
MILESTONE_NAMES = ("ALDT", "AIBT", "AOBT", "ATOT", "TOBT")
ACTUAL_ORDER = ("AOBT", "ATOT", "ALDT", "AIBT")

KN_TO_MS = 1852.0 / 3600.0

# iata -> (icao, lat, lon)
AIRPORTS = {
    "ABZ": ("EGPD", 57.2019, -2.1978),
    "SVG": ("ENZV", 58.8767, 5.6378),
    "OSL": ("ENGM", 60.1976, 11.1004),
    "BGO": ("ENBR", 60.2934, 5.2181),
    "TRD": ("ENVA", 63.4578, 10.9240),
    "CPH": ("EKCH", 55.6180, 12.6560),
    "AMS": ("EHAM", 52.3105, 4.7683),
    "LHR": ("EGLL", 51.4700, -0.4543),
}

AIRLINES = ("SK", "WF", "BA", "KL", "DY")
_REG_PREFIX = {"SK": "OY", "WF": "LN", "BA": "G", "KL": "PH", "DY": "LN"}


@dataclass
class TrackPlan:
    waypoints: list[tuple[float, float]]
    speed_kn: float
    airborne_from: float
    airborne_until: float
    cruise_altitude_ft: float = 24000.0
    climb_rate_ftmin: float = 2000.0

    def length_m(self) -> float:
        return geo.polyline_length_m(self.waypoints)

    def to_document(self) -> dict:
        return {
            "waypoints": [list(p) for p in self.waypoints],
            "speedKn": self.speed_kn,
            "airborneFrom": self.airborne_from,
            "airborneUntil": self.airborne_until,
            "cruiseAltitudeFt": self.cruise_altitude_ft,
            "climbRateFtMin": self.climb_rate_ftmin,
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "TrackPlan":
        return cls(
            waypoints=[tuple(p) for p in doc["waypoints"]],
            speed_kn=doc["speedKn"],
            airborne_from=doc["airborneFrom"],
            airborne_until=doc["airborneUntil"],
            cruise_altitude_ft=doc.get("cruiseAltitudeFt", 24000.0),
            climb_rate_ftmin=doc.get("climbRateFtMin", 2000.0),
        )


@dataclass
class ScriptedFlight:
    flight_number: str
    airline_iata: str
    direction: str  # "A" arrival, "D" departure
    other_airport_iata: str
    other_airport_icao: str
    registration: str  # dashed tail number; schedule feed strips the dash
    adshex: str
    stand_code: str
    gate_code: str
    scheduled_offset: float  # seconds from script start
    milestones: dict[str, float] = field(default_factory=dict)
    track: TrackPlan | None = None

    def scheduled_at(self, start: _dt.datetime) -> _dt.datetime:
        return start + _dt.timedelta(seconds=self.scheduled_offset)

    def milestone_at(self, start: _dt.datetime, name: str) -> _dt.datetime | None:
        offset = self.milestones.get(name)
        if offset is None:
            return None
        return self.scheduled_at(start) + _dt.timedelta(seconds=offset)

    def route(self, airport_iata: str) -> str:
        if self.direction == "A":
            return f"{self.other_airport_iata}-{airport_iata}"
        return f"{airport_iata}-{self.other_airport_iata}"

    def to_document(self) -> dict:
        doc: dict[str, Any] = {
            "flightNumber": self.flight_number,
            "airlineIATA": self.airline_iata,
            "direction": self.direction,
            "otherAirportIATA": self.other_airport_iata,
            "otherAirportICAO": self.other_airport_icao,
            "registration": self.registration,
            "adshex": self.adshex,
            "standCode": self.stand_code,
            "gateCode": self.gate_code,
            "scheduledOffset": self.scheduled_offset,
            "milestones": dict(self.milestones),
        }
        if self.track is not None:
            doc["track"] = self.track.to_document()
        return doc

    @classmethod
    def from_document(cls, doc: Mapping) -> "ScriptedFlight":
        track = doc.get("track")
        return cls(
            flight_number=doc["flightNumber"],
            airline_iata=doc["airlineIATA"],
            direction=doc["direction"],
            other_airport_iata=doc["otherAirportIATA"],
            other_airport_icao=doc["otherAirportICAO"],
            registration=doc["registration"],
            adshex=doc["adshex"],
            stand_code=doc["standCode"],
            gate_code=doc["gateCode"],
            scheduled_offset=doc["scheduledOffset"],
            milestones={k: float(v) for k, v in (doc.get("milestones") or {}).items()},
            track=TrackPlan.from_document(track) if track else None,
        )


@dataclass
class ScenarioScript:
    seed: int
    airport_iata: str
    start: _dt.datetime
    flights: list[ScriptedFlight] = field(default_factory=list)

    def to_document(self) -> dict:
        return {
            "seed": self.seed,
            "airportIATA": self.airport_iata,
            "startTime": timefmt.format_wire(self.start),
            "flights": [f.to_document() for f in self.flights],
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "ScenarioScript":
        return cls(
            seed=doc.get("seed", 0),
            airport_iata=doc.get("airportIATA", "ABZ"),
            start=timefmt.parse_wire(doc["startTime"]),
            flights=[ScriptedFlight.from_document(f)
                     for f in doc.get("flights", [])],
        )


def validate_script(script: ScenarioScript) -> list[str]:
    problems: list[str] = []
    seen_numbers: set[str] = set()
    for i, flight in enumerate(script.flights):
        label = f"flight {i} ({flight.airline_iata}{flight.flight_number})"
        if flight.flight_number in seen_numbers:
            problems.append(f"{label}: duplicate flight number")
        seen_numbers.add(flight.flight_number)
        if flight.direction not in ("A", "D"):
            problems.append(f"{label}: direction must be A or D")
        for name in flight.milestones:
            if name not in MILESTONE_NAMES:
                problems.append(f"{label}: unknown milestone {name!r}")
        present = [flight.milestones[n] for n in ACTUAL_ORDER
                   if n in flight.milestones]
        if any(b < a for a, b in zip(present, present[1:])):
            problems.append(
                f"{label}: milestones must keep AOBT <= ATOT <= ALDT <= AIBT")
        track = flight.track
        if track is not None:
            if len(track.waypoints) < 2:
                problems.append(f"{label}: track needs at least two waypoints")
            if track.speed_kn <= 0:
                problems.append(f"{label}: track speed must be positive")
            if track.airborne_until <= track.airborne_from:
                problems.append(f"{label}: airborne window is empty")
            if track.climb_rate_ftmin <= 0:
                problems.append(f"{label}: climb rate must be positive")
    return problems


def load_script(source: str | Path | Mapping) -> ScenarioScript:
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    script = ScenarioScript.from_document(doc)
    problems = validate_script(script)
    if problems:
        raise ValueError("; ".join(problems))
    return script


def save_script(script: ScenarioScript, path: str | Path) -> None:
    Path(path).write_text(json.dumps(script.to_document(), indent=2) + "\n")


def _track_between(origin: str, destination: str, speed_kn: float,
                   rng: random.Random | None = None,
                   ) -> tuple[list[tuple[float, float]], float]:
    """Waypoints origin->destination (optional mid jitter) and flight seconds."""
    a = AIRPORTS[origin][1:]
    b = AIRPORTS[destination][1:]
    waypoints: list[tuple[float, float]] = [a]
    if rng is not None:
        mid = geo.intermediate_point(a, b, 0.5)
        waypoints.append((round(mid[0] + rng.uniform(-0.3, 0.3), 4),
                          round(mid[1] + rng.uniform(-0.3, 0.3), 4)))
    waypoints.append(b)
    seconds = geo.polyline_length_m(waypoints) / (speed_kn * KN_TO_MS)
    return waypoints, seconds


def generate_scenario(seed: int, pairs: int = 5, airport_iata: str = "ABZ",
                      start: _dt.datetime | None = None,
                      spacing_seconds: float = 1200.0) -> ScenarioScript:
    """A scripted day: `pairs` inbound/outbound turnarounds, one per aircraft.

    Same seed, same script, down to every waypoint and offset.
    """
    rng = random.Random(seed)
    if start is None:
        start = _dt.datetime(2021, 2, 4, 6, 0, tzinfo=timefmt.UTC)
    flights: list[ScriptedFlight] = []
    used_numbers: set[str] = set()

    def fresh_number() -> str:
        while True:
            number = str(rng.randint(100, 9899))
            if number not in used_numbers:
                used_numbers.add(number)
                return number

    others = [iata for iata in AIRPORTS if iata != airport_iata]
    for pair in range(pairs):
        airline = rng.choice(AIRLINES)
        other = rng.choice(others)
        other_icao = AIRPORTS[other][0]
        registration = (_REG_PREFIX[airline] + "-"
                        + "".join(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
                                  for _ in range(3)))
        adshex = "".join(rng.choice("0123456789ABCDEF") for _ in range(6))
        speed = float(rng.randrange(240, 431, 10))
        cruise = float(rng.randrange(18000, 36001, 2000))
        climb = float(rng.randrange(1800, 2401, 100))
        stand = gate = f"{pair + 1:02d}"

        inbound_sched = pair * spacing_seconds + rng.randrange(0, 300, 60)
        landing_delay = float(rng.randrange(-120, 301, 60))
        taxi_in = float(rng.randrange(240, 601, 30))
        in_waypoints, in_seconds = _track_between(
            other, airport_iata, speed, rng)
        flights.append(ScriptedFlight(
            flight_number=fresh_number(), airline_iata=airline,
            direction="A", other_airport_iata=other,
            other_airport_icao=other_icao, registration=registration,
            adshex=adshex, stand_code=stand, gate_code=gate,
            scheduled_offset=inbound_sched,
            milestones={"ALDT": landing_delay,
                        "AIBT": landing_delay + taxi_in},
            track=TrackPlan(
                waypoints=in_waypoints, speed_kn=speed,
                airborne_from=landing_delay - in_seconds,
                airborne_until=landing_delay,
                cruise_altitude_ft=cruise, climb_rate_ftmin=climb)))

        turnaround = float(rng.randrange(3600, 5401, 300))
        outbound_sched = inbound_sched + landing_delay + taxi_in + turnaround
        tobt = float(rng.randrange(-300, 1, 60))
        aobt = tobt + rng.randrange(0, 301, 60)
        taxi_out = float(rng.randrange(240, 601, 30))
        atot = aobt + taxi_out
        out_waypoints, out_seconds = _track_between(
            airport_iata, other, speed, rng)
        flights.append(ScriptedFlight(
            flight_number=fresh_number(), airline_iata=airline,
            direction="D", other_airport_iata=other,
            other_airport_icao=other_icao, registration=registration,
            adshex=adshex, stand_code=stand, gate_code=gate,
            scheduled_offset=outbound_sched,
            milestones={"TOBT": tobt, "AOBT": aobt, "ATOT": atot},
            track=TrackPlan(
                waypoints=out_waypoints, speed_kn=speed,
                airborne_from=atot, airborne_until=atot + out_seconds,
                cruise_altitude_ft=cruise, climb_rate_ftmin=climb)))

    script = ScenarioScript(seed=seed, airport_iata=airport_iata,
                            start=start, flights=flights)
    problems = validate_script(script)
    if problems:
        raise AssertionError(f"generated scenario is invalid: {problems}")
    return script


def demo_turnaround_script(start: _dt.datetime | None = None) -> ScenarioScript:
    """One clean turnaround with round numbers.

    The inbound rolls 300s from touchdown to blocks, the aircraft sits 1800s
    on stand, and the outbound takes 300s from off-block to wheels-up.
    """
    if start is None:
        start = _dt.datetime(2021, 2, 4, 6, 0, tzinfo=timefmt.UTC)
    speed = 300.0
    in_waypoints, in_seconds = _track_between("SVG", "ABZ", speed)
    out_waypoints, out_seconds = _track_between("ABZ", "SVG", speed)
    inbound = ScriptedFlight(
        flight_number="1234", airline_iata="SK", direction="A",
        other_airport_iata="SVG", other_airport_icao="ENZV",
        registration="OY-AAA", adshex="ADF123", stand_code="01",
        gate_code="01", scheduled_offset=3600.0,
        milestones={"ALDT": 0.0, "AIBT": 300.0},
        track=TrackPlan(waypoints=in_waypoints, speed_kn=speed,
                        airborne_from=-in_seconds, airborne_until=0.0,
                        cruise_altitude_ft=20000, climb_rate_ftmin=2000))
    # outbound scheduled one hour after the inbound; AOBT lands exactly
    # 1800s after the inbound AIBT (3600+300+1800 = 5700 = 7200-1500)
    outbound = ScriptedFlight(
        flight_number="1235", airline_iata="SK", direction="D",
        other_airport_iata="SVG", other_airport_icao="ENZV",
        registration="OY-AAA", adshex="ADF123", stand_code="01",
        gate_code="01", scheduled_offset=7200.0,
        milestones={"TOBT": -1500.0, "AOBT": -1500.0, "ATOT": -1200.0},
        track=TrackPlan(waypoints=out_waypoints, speed_kn=speed,
                        airborne_from=-1200.0,
                        airborne_until=-1200.0 + out_seconds,
                        cruise_altitude_ft=20000, climb_rate_ftmin=2000))
    return ScenarioScript(seed=0, airport_iata="ABZ", start=start,
                          flights=[inbound, outbound])
