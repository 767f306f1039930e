"""A-CDM arithmetic: taxi/block/turnaround times, delay colour, milestones.

All functions are pure over FlightRecord values; the service layer owns the
broker round-trips.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
from dataclasses import dataclass
from typing import Optional

from ..model import FlightRecord

# actual milestones in their only legal order of occurrence
ACTUALS = ("AOBT", "ATOT", "ALDT", "AIBT")

MILESTONE_FIELDS = {
    "AOBT": "dateAOBT", "ATOT": "dateATOT", "ALDT": "dateALDT",
    "AIBT": "dateAIBT", "TOBT": "dateTOBT", "EOBT": "dateEOBT",
    "ETOT": "dateETOT", "ELDT": "dateELDT", "EIBT": "dateEIBT",
}

# a target or estimate may be revised until this actual lands
_REVISABLE_UNTIL = {
    "TOBT": "dateAOBT", "EOBT": "dateAOBT", "ETOT": "dateATOT",
    "ELDT": "dateALDT", "EIBT": "dateAIBT",
}

DEFAULT_DELAY_THRESHOLD_S = 300.0


class MilestoneError(ValueError):
    """A milestone application or derived computation that must be refused."""


def _seconds(later: Optional[_dt.datetime],
             earlier: Optional[_dt.datetime]) -> Optional[float]:
    if later is None or earlier is None:
        return None
    return (later - earlier).total_seconds()


def compute_taxi_times(flight: FlightRecord
                       ) -> tuple[Optional[float], Optional[float]]:
    """(AXOT, AXIT): off-block to wheels-up, touchdown to on-block."""
    axot = _seconds(flight.dateATOT, flight.dateAOBT)
    axit = _seconds(flight.dateAIBT, flight.dateALDT)
    for name, value in (("AXOT", axot), ("AXIT", axit)):
        if value is not None and value < 0:
            raise MilestoneError(f"{name} would be negative ({value:.0f}s)")
    return axot, axit


def compute_block_times(flight: FlightRecord
                        ) -> tuple[Optional[float], Optional[float]]:
    """(in-air seconds, block-to-block seconds)."""
    in_air = _seconds(flight.dateALDT, flight.dateATOT)
    block = _seconds(flight.dateAIBT, flight.dateAOBT)
    for name, value in (("in-air time", in_air), ("block-to-block", block)):
        if value is not None and value < 0:
            raise MilestoneError(f"{name} would be negative ({value:.0f}s)")
    return in_air, block


def derived_times(flight: FlightRecord) -> dict[str, float]:
    """The derived duration attributes implied by the flight's actuals."""
    axot, axit = compute_taxi_times(flight)
    updates: dict[str, float] = {}
    if axot is not None:
        updates["dateAXOT"] = axot
    if axit is not None:
        updates["dateAXIT"] = axit
    return updates


@dataclass(frozen=True)
class TurnaroundLink:
    inbound_flight: str
    outbound_flight: str
    stand_code: Optional[str]
    attt: Optional[float]
    sttt: Optional[float]
    ettt: Optional[float]

    def to_document(self) -> dict:
        return {
            "inboundFlight": self.inbound_flight,
            "outboundFlight": self.outbound_flight,
            "standCode": self.stand_code,
            "attt": self.attt, "sttt": self.sttt, "ettt": self.ettt,
        }


def link_turnaround(inbound: FlightRecord, outbound: FlightRecord,
                    airport_urn: str) -> TurnaroundLink:
    """Pair an arrival with the departure that reuses its aircraft."""
    if not inbound.hasAircraft or inbound.hasAircraft != outbound.hasAircraft:
        raise MilestoneError(
            f"turnaround needs one aircraft: inbound has "
            f"{inbound.hasAircraft!r}, outbound {outbound.hasAircraft!r}")
    if not inbound.is_arrival_at(airport_urn):
        raise MilestoneError(f"{inbound.entity_id} does not arrive at "
                             f"{airport_urn}")
    if not outbound.is_departure_from(airport_urn):
        raise MilestoneError(f"{outbound.entity_id} does not depart from "
                             f"{airport_urn}")
    attt = _seconds(outbound.dateAOBT, inbound.dateAIBT)
    if attt is not None and attt < 0:
        raise MilestoneError("outbound went off-block before the inbound "
                             "reached the stand")
    sttt = _seconds(outbound.dateSOBT, inbound.dateSIBT)
    estimated_obt = outbound.dateTOBT or outbound.dateEOBT
    estimated_ibt = inbound.dateAIBT or inbound.dateEIBT
    ettt = _seconds(estimated_obt, estimated_ibt)
    return TurnaroundLink(
        inbound_flight=inbound.entity_id, outbound_flight=outbound.entity_id,
        stand_code=outbound.standCode or inbound.standCode,
        attt=attt, sttt=sttt, ettt=ettt)


@dataclass(frozen=True)
class DelayStatus:
    classification: str  # future | onTime | late | unknown
    delay_seconds: Optional[float] = None
    reference_milestone: Optional[str] = None

    def to_document(self) -> dict:
        return {
            "classification": self.classification,
            "delaySeconds": self.delay_seconds,
            "referenceMilestone": self.reference_milestone,
        }


def _looks_like_arrival(flight: FlightRecord) -> bool:
    if flight.dateSIBT or flight.dateAIBT or flight.dateEIBT \
            or flight.dateALDT or flight.dateELDT:
        return True
    return False


def classify_delay(flight: FlightRecord, now: _dt.datetime,
                   threshold_seconds: float = DEFAULT_DELAY_THRESHOLD_S,
                   arrival: Optional[bool] = None) -> DelayStatus:
    """Colour a flight: grey future, green on time, red late.

    Arrivals compare the best-known in-block time against schedule,
    departures the best-known off-block time. A flight that has not begun
    (no actuals, reference still ahead) is future; with no schedule at all
    the answer is unknown.
    """
    if arrival is None:
        arrival = _looks_like_arrival(flight)
    if arrival:
        scheduled = flight.dateSIBT or flight.dateScheduled
        reference = "SIBT" if flight.dateSIBT else "dateScheduled"
        best = flight.dateAIBT or flight.dateEIBT
    else:
        scheduled = flight.dateSOBT or flight.dateScheduled
        reference = "SOBT" if flight.dateSOBT else "dateScheduled"
        best = flight.dateAOBT or flight.dateTOBT or flight.dateEOBT
    if scheduled is None:
        return DelayStatus("unknown")
    begun = now > scheduled or any(
        getattr(flight, MILESTONE_FIELDS[m]) is not None for m in ACTUALS)
    if not begun:
        return DelayStatus("future", reference_milestone=reference)
    if best is None:
        # under way with nothing better known: it cannot block in/off
        # earlier than right now
        best = max(now, scheduled)
    delay = (best - scheduled).total_seconds()
    classification = "late" if delay > threshold_seconds else "onTime"
    return DelayStatus(classification, delay_seconds=delay,
                       reference_milestone=reference)


def apply_milestone(flight: FlightRecord, milestone: str, at: _dt.datetime
                    ) -> tuple[FlightRecord, dict[str, object]]:
    """Record a milestone; returns (updated record, changed fields).

    Actuals are immutable (same-value reapplication is a no-op) and must
    respect AOBT <= ATOT <= ALDT <= AIBT against everything already set.
    Targets and estimates stay revisable until their actual lands.
    """
    name = milestone.upper()
    field = MILESTONE_FIELDS.get(name)
    if field is None:
        raise MilestoneError(f"unknown milestone {milestone!r}")
    if at.tzinfo is None:
        raise MilestoneError("milestone timestamps must carry a timezone")
    current = getattr(flight, field)
    if name in ACTUALS:
        if current is not None:
            if current == at:
                return flight, {}
            raise MilestoneError(
                f"{name} is already set to {current.isoformat()} and "
                f"actuals are immutable")
        index = ACTUALS.index(name)
        for earlier in ACTUALS[:index]:
            value = getattr(flight, MILESTONE_FIELDS[earlier])
            if value is not None and value > at:
                raise MilestoneError(
                    f"ordering violation: {name} at {at.isoformat()} would "
                    f"precede {earlier} at {value.isoformat()}")
        for later in ACTUALS[index + 1:]:
            value = getattr(flight, MILESTONE_FIELDS[later])
            if value is not None and value < at:
                raise MilestoneError(
                    f"ordering violation: {name} at {at.isoformat()} would "
                    f"follow {later} at {value.isoformat()}")
    else:
        guard = _REVISABLE_UNTIL[name]
        if getattr(flight, guard) is not None:
            raise MilestoneError(
                f"{name} can no longer change: {guard[4:]} has happened")
        if current == at:
            return flight, {}

    changed: dict[str, object] = {field: at}
    updated = dataclasses.replace(flight, **{field: at})
    if name in ACTUALS:
        if updated.state in (None, "scheduled"):
            changed["state"] = "active"
        if name == "ALDT" and updated.state not in (
                "cancelled", "diverted", "redirected"):
            changed["state"] = "landed"
        if "state" in changed:
            updated = dataclasses.replace(updated, state=changed["state"])
        for derived_field, value in derived_times(updated).items():
            if getattr(updated, derived_field) != value:
                changed[derived_field] = value
                updated = dataclasses.replace(updated,
                                              **{derived_field: value})
    return updated, changed
