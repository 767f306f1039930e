"""Typed views over context entities for the aeronautics types.

Each record maps 1:1 onto entity attributes using the wire names, so the
dataclass fields keep the camelCase spelling. Absent fields stay None and are
omitted on serialization. from_entity ignores attributes it does not know
about (entities may carry extra derived attributes).
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, fields as _dc_fields
from typing import Any, Optional

from . import timefmt
from .attributes import (
    Attribute,
    ContextEntity,
    GEO_PROPERTY,
    PROPERTY,
    RELATIONSHIP,
    make_entity_id,
    split_entity_id,
)

_TIME = "time"
_DURATION = "duration"
_TEXT = "text"
_NUMBER = "number"
_BOOL = "bool"
_REL = "rel"
_GEO = "geo"


def _coerce(shape: str, value: Any) -> Any:
    if value is None:
        return None
    if shape == _TIME and isinstance(value, str):
        return timefmt.parse_wire(value)
    if shape == _DURATION and isinstance(value, (int, float)):
        return float(value)
    return value


def _attribute_for(shape: str, value: Any) -> Attribute:
    if shape == _REL:
        return Attribute(RELATIONSHIP, value)
    if shape == _GEO:
        return Attribute(GEO_PROPERTY, value)
    return Attribute(PROPERTY, value)


class _RecordBase:
    """Shared entity conversion driven by the subclass FIELD_SHAPES table."""

    ENTITY_TYPE = ""
    FIELD_SHAPES: dict[str, str] = {}

    @property
    def entity_id(self) -> str:
        return make_entity_id(self.ENTITY_TYPE, self.key)

    @classmethod
    def from_entity(cls, entity: ContextEntity):
        if entity.type != cls.ENTITY_TYPE:
            raise ValueError(
                f"expected a {cls.ENTITY_TYPE} entity, got {entity.type}")
        _, key = split_entity_id(entity.id)
        kwargs: dict[str, Any] = {"key": key}
        for name, shape in cls.FIELD_SHAPES.items():
            kwargs[name] = _coerce(shape, entity.attr_value(name))
        return cls(**kwargs)

    def to_entity(self) -> ContextEntity:
        attributes: dict[str, Attribute] = {}
        for name, shape in self.FIELD_SHAPES.items():
            value = getattr(self, name)
            if value is None:
                continue
            attributes[name] = _attribute_for(shape, value)
        return ContextEntity(id=self.entity_id, type=self.ENTITY_TYPE,
                             attributes=attributes)

    def field_names(self) -> list[str]:
        return [f.name for f in _dc_fields(self)]


@dataclass
class FlightRecord(_RecordBase):
    key: str
    flightNumber: Optional[str] = None
    flightNumberIATA: Optional[str] = None
    flightNumberICAO: Optional[str] = None
    state: Optional[str] = None
    passengerCount: Optional[int] = None
    dateDeparture: Optional[_dt.datetime] = None
    dateArrival: Optional[_dt.datetime] = None
    dateSOBT: Optional[_dt.datetime] = None
    dateEOBT: Optional[_dt.datetime] = None
    dateAOBT: Optional[_dt.datetime] = None
    dateTOBT: Optional[_dt.datetime] = None
    dateETOT: Optional[_dt.datetime] = None
    dateATOT: Optional[_dt.datetime] = None
    dateCTOT: Optional[_dt.datetime] = None
    dateTTOT: Optional[_dt.datetime] = None
    dateELDT: Optional[_dt.datetime] = None
    dateALDT: Optional[_dt.datetime] = None
    dateTLDT: Optional[_dt.datetime] = None
    dateSIBT: Optional[_dt.datetime] = None
    dateEIBT: Optional[_dt.datetime] = None
    dateAIBT: Optional[_dt.datetime] = None
    dateEXOT: Optional[float] = None
    dateAXOT: Optional[float] = None
    dateEXIT: Optional[float] = None
    dateAXIT: Optional[float] = None
    dateSTTT: Optional[float] = None
    dateETTT: Optional[float] = None
    dateATTT: Optional[float] = None
    standCode: Optional[str] = None
    gateCode: Optional[str] = None
    dateScheduled: Optional[_dt.datetime] = None
    hasAircraft: Optional[str] = None
    hasAircraftModel: Optional[str] = None
    departsFromAirport: Optional[str] = None
    arrivesToAirport: Optional[str] = None
    belongsToAirline: Optional[str] = None

    ENTITY_TYPE = "Flight"
    FIELD_SHAPES = {
        "flightNumber": _TEXT, "flightNumberIATA": _TEXT,
        "flightNumberICAO": _TEXT, "state": _TEXT,
        "passengerCount": _NUMBER,
        "dateDeparture": _TIME, "dateArrival": _TIME,
        "dateSOBT": _TIME, "dateEOBT": _TIME, "dateAOBT": _TIME,
        "dateTOBT": _TIME,
        "dateETOT": _TIME, "dateATOT": _TIME, "dateCTOT": _TIME,
        "dateTTOT": _TIME,
        "dateELDT": _TIME, "dateALDT": _TIME, "dateTLDT": _TIME,
        "dateSIBT": _TIME, "dateEIBT": _TIME, "dateAIBT": _TIME,
        "dateEXOT": _DURATION, "dateAXOT": _DURATION,
        "dateEXIT": _DURATION, "dateAXIT": _DURATION,
        "dateSTTT": _DURATION, "dateETTT": _DURATION, "dateATTT": _DURATION,
        "standCode": _TEXT, "gateCode": _TEXT,
        "dateScheduled": _TIME,
        "hasAircraft": _REL, "hasAircraftModel": _REL,
        "departsFromAirport": _REL, "arrivesToAirport": _REL,
        "belongsToAirline": _REL,
    }

    def is_arrival_at(self, airport_urn: str) -> bool:
        return self.arrivesToAirport == airport_urn

    def is_departure_from(self, airport_urn: str) -> bool:
        return self.departsFromAirport == airport_urn


@dataclass
class AircraftRecord(_RecordBase):
    key: str
    flightNumber: Optional[str] = None
    flightNumberIATA: Optional[str] = None
    adshex: Optional[str] = None
    location: Optional[dict] = None
    heading: Optional[float] = None
    speed: Optional[float] = None
    verticalSpeed: Optional[float] = None
    isOnGround: Optional[bool] = None
    dateIssued: Optional[_dt.datetime] = None

    ENTITY_TYPE = "Aircraft"
    FIELD_SHAPES = {
        "flightNumber": _TEXT, "flightNumberIATA": _TEXT, "adshex": _TEXT,
        "location": _GEO, "heading": _NUMBER, "speed": _NUMBER,
        "verticalSpeed": _NUMBER, "isOnGround": _BOOL, "dateIssued": _TIME,
    }

    @property
    def registration(self) -> str:
        return self.key


@dataclass
class AircraftModelRecord(_RecordBase):
    key: str
    iataCode: Optional[str] = None
    icaoCode: Optional[str] = None
    length: Optional[float] = None
    wingspan: Optional[float] = None
    height: Optional[float] = None
    maximumSpeed: Optional[float] = None

    ENTITY_TYPE = "AircraftModel"
    FIELD_SHAPES = {
        "iataCode": _TEXT, "icaoCode": _TEXT, "length": _NUMBER,
        "wingspan": _NUMBER, "height": _NUMBER, "maximumSpeed": _NUMBER,
    }


@dataclass
class AirlineRecord(_RecordBase):
    key: str
    iataCode: Optional[str] = None
    icaoCode: Optional[str] = None
    callsign: Optional[str] = None
    name: Optional[str] = None
    shortName: Optional[str] = None
    countryAddress: Optional[str] = None

    ENTITY_TYPE = "Airline"
    FIELD_SHAPES = {
        "iataCode": _TEXT, "icaoCode": _TEXT, "callsign": _TEXT,
        "name": _TEXT, "shortName": _TEXT, "countryAddress": _TEXT,
    }


@dataclass
class AirportRecord(_RecordBase):
    key: str
    iataCode: Optional[str] = None
    icaoCode: Optional[str] = None
    name: Optional[str] = None
    address: Optional[str] = None
    location: Optional[dict] = None

    ENTITY_TYPE = "Airport"
    FIELD_SHAPES = {
        "iataCode": _TEXT, "icaoCode": _TEXT, "name": _TEXT,
        "address": _TEXT, "location": _GEO,
    }


# Legal status moves for a flight notification; completed is terminal.
NOTIFICATION_TRANSITIONS = {
    ("unknown", "active"),
    ("active", "unknown"),
    ("active", "inactive"),
    ("inactive", "active"),
    ("active", "completed"),
}


def notification_transition_allowed(current: str, target: str) -> bool:
    if current == target:
        return True
    return (current, target) in NOTIFICATION_TRANSITIONS


@dataclass
class FlightNotificationRecord(_RecordBase):
    key: str
    description: Optional[str] = None
    dateIssued: Optional[_dt.datetime] = None
    dateModified: Optional[_dt.datetime] = None
    issuer: Optional[str] = None
    status: Optional[str] = None
    refFlight: Optional[str] = None

    ENTITY_TYPE = "FlightNotification"
    FIELD_SHAPES = {
        "description": _TEXT, "dateIssued": _TIME, "dateModified": _TIME,
        "issuer": _TEXT, "status": _TEXT, "refFlight": _REL,
    }
