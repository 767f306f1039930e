"""Feed generation: schedule documents and position frames from a script.

Everything here is a pure function of (script, time) so repeated runs over
the same tick schedule are byte-identical.
"""
from __future__ import annotations

import datetime as _dt
import gzip
import json
import struct

from . import geo
from .scenario import KN_TO_MS, ScenarioScript, ScriptedFlight

SCHEDULE_MILESTONES = ("ALDT", "AIBT", "AOBT", "TOBT")


def _iso(at: _dt.datetime) -> str:
    return at.isoformat()


def _null_record() -> dict:
    return {
        "id": 0, "FlightNumber": None, "AirlineIATA": None,
        "DepartureArrivalType": None, "OriginDestAirportIATA": None,
        "OriginDestAirportICAO": None, "Registration": None,
        "StandCode": None, "GateCode": None, "ALDT": None, "AIBT": None,
        "AOBT": None, "TOBT": None, "ScheduledDateTime": None,
    }


def schedule_record(script: ScenarioScript, index: int,
                    flight: ScriptedFlight, at_time: _dt.datetime) -> dict:
    """One schedule row; milestone columns fill as simulated time passes."""
    record = {
        "id": index,
        "FlightNumber": flight.flight_number,
        "AirlineIATA": flight.airline_iata,
        "DepartureArrivalType": flight.direction,
        "OriginDestAirportIATA": flight.other_airport_iata,
        "OriginDestAirportICAO": flight.other_airport_icao,
        "Registration": flight.registration.replace("-", ""),
        "StandCode": flight.stand_code,
        "GateCode": flight.gate_code,
    }
    for name in SCHEDULE_MILESTONES:
        happened_at = flight.milestone_at(script.start, name)
        if happened_at is not None and at_time >= happened_at:
            record[name] = _iso(happened_at)
        else:
            record[name] = None
    record["ScheduledDateTime"] = _iso(flight.scheduled_at(script.start))
    return record


def serve_schedule(script: ScenarioScript, at_time: _dt.datetime,
                   include_null_record: bool = True) -> list[dict]:
    if not script.flights:
        return []
    records = []
    if include_null_record:
        records.append(_null_record())
    for index, flight in enumerate(script.flights, start=1):
        records.append(schedule_record(script, index, flight, at_time))
    return records


def _altitude_profile(track, elapsed: float, total: float) -> tuple[float, float]:
    """(altitude ft, vertical rate ft/min) for elapsed seconds airborne."""
    climb_fts = track.climb_rate_ftmin / 60.0
    ramp = min(track.cruise_altitude_ft / climb_fts, total / 2.0)
    peak = ramp * climb_fts
    if elapsed <= ramp:
        altitude = climb_fts * elapsed
        rate = track.climb_rate_ftmin if elapsed < ramp else 0.0
    elif elapsed >= total - ramp:
        altitude = climb_fts * (total - elapsed)
        rate = -track.climb_rate_ftmin
    else:
        altitude = peak
        rate = 0.0
    return max(altitude, 0.0), rate


def aircraft_state(script: ScenarioScript, flight: ScriptedFlight,
                   at_time: _dt.datetime) -> dict | None:
    """Position entry for one flight, or None while it is outside its window."""
    track = flight.track
    if track is None:
        return None
    since_sched = (at_time - flight.scheduled_at(script.start)).total_seconds()
    elapsed = since_sched - track.airborne_from
    total = track.airborne_until - track.airborne_from
    if elapsed < 0 or elapsed > total:
        return None
    travelled = min(track.speed_kn * KN_TO_MS * elapsed, track.length_m())
    lat, lon, bearing = geo.polyline_position(track.waypoints, travelled)
    altitude, rate = _altitude_profile(track, elapsed, total)
    return {
        "reg": flight.registration,
        "flight_number": f"{flight.airline_iata}{flight.flight_number}",
        "adshex": flight.adshex,
        "lat": round(lat, 6),
        "lon": round(lon, 6),
        "altitude": int(round(altitude)),
        "heading": int(round(bearing)) % 360,
        "speed": int(round(track.speed_kn)),
        "vert_rate": int(round(rate)),
        "is_on_ground": int(round(altitude)) == 0,
        "pos_update_time": int(at_time.timestamp()),
        "route": flight.route(script.airport_iata),
    }


def frame_at(script: ScenarioScript, at_time: _dt.datetime) -> dict:
    """The position frame for one tick, keyed by aircraft hex id."""
    frame = {}
    for flight in script.flights:
        state = aircraft_state(script, flight, at_time)
        if state is not None:
            frame[flight.adshex] = state
    return frame


def encode_frame(frame: dict) -> bytes:
    """Canonical JSON, gzipped with a pinned header so bytes are repeatable."""
    data = json.dumps(frame, sort_keys=True, separators=(",", ":")).encode()
    return gzip.compress(data, compresslevel=9, mtime=0)


def frame_message(frame: dict) -> bytes:
    """Length-prefixed wire form: 4-byte big-endian size, then gzip block."""
    payload = encode_frame(frame)
    return struct.pack(">I", len(payload)) + payload


def decode_frame(payload: bytes) -> dict:
    return json.loads(gzip.decompress(payload).decode("utf-8"))
