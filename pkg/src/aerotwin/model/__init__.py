"""SmartAeronautics data model: entities, attributes, URN identity, wire JSON."""

from .attributes import (
    ACTUAL_CHAIN,
    ATTRIBUTE_KINDS,
    Attribute,
    CORE_CONTEXT,
    ContextEntity,
    FLIGHT_STATES,
    GEO_PROPERTY,
    NOTIFICATION_STATUSES,
    PROPERTY,
    ParseError,
    RELATIONSHIP,
    is_entity_id,
    make_entity_id,
    parse_entity,
    serialize_entity,
    split_entity_id,
    validate_entity,
)
from .records import (
    AircraftModelRecord,
    AircraftRecord,
    AirlineRecord,
    AirportRecord,
    FlightNotificationRecord,
    FlightRecord,
    NOTIFICATION_TRANSITIONS,
    notification_transition_allowed,
)
from . import timefmt

__all__ = [
    "ACTUAL_CHAIN", "ATTRIBUTE_KINDS", "Attribute", "CORE_CONTEXT",
    "ContextEntity", "FLIGHT_STATES", "GEO_PROPERTY",
    "NOTIFICATION_STATUSES", "PROPERTY", "ParseError", "RELATIONSHIP",
    "is_entity_id", "make_entity_id", "parse_entity", "serialize_entity",
    "split_entity_id", "validate_entity",
    "AircraftModelRecord", "AircraftRecord", "AirlineRecord",
    "AirportRecord", "FlightNotificationRecord", "FlightRecord",
    "NOTIFICATION_TRANSITIONS", "notification_transition_allowed",
    "timefmt",
]
