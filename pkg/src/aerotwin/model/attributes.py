"""Context entities: URN identity, attributes, and the JSON wire shape."""
from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from . import timefmt

CORE_CONTEXT = (
    "https://smartdatamodels.org/context.jsonld",
    "https://uri.etsi.org/ngsi-ld/v1/ngsi-ld-core-context.jsonld",
)

PROPERTY = "Property"
RELATIONSHIP = "Relationship"
GEO_PROPERTY = "GeoProperty"
ATTRIBUTE_KINDS = (PROPERTY, RELATIONSHIP, GEO_PROPERTY)

_URN_PREFIX = "urn:ngsi-ld:"
_TYPE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9]*$")
# local keys may carry hyphens ("AirbusA310-200") but no URN-reserved chars
_KEY_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ParseError(ValueError):
    """Raised when a wire document cannot be read; carries the JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _key_prefix(entity_type: str) -> str:
    # lower camel case: "Flight" -> "flight", "AircraftModel" -> "aircraftModel"
    return entity_type[0].lower() + entity_type[1:]


def make_entity_id(entity_type: str, local_key: str) -> str:
    """Build a URN id of shape urn:ngsi-ld:<Type>:<type-lowercased>-<key>."""
    if not entity_type or not _TYPE_RE.match(entity_type):
        raise ValueError(f"invalid entity type: {entity_type!r}")
    if not local_key or not _KEY_RE.match(str(local_key)):
        raise ValueError(f"invalid local key: {local_key!r}")
    return f"{_URN_PREFIX}{entity_type}:{_key_prefix(entity_type)}-{local_key}"


def split_entity_id(urn: str) -> tuple[str, str]:
    """Return (entityType, localKey) from a URN, raising ValueError if malformed."""
    if not isinstance(urn, str) or not urn.startswith(_URN_PREFIX):
        raise ValueError(f"not an entity URN: {urn!r}")
    segments = urn.split(":")
    if len(segments) != 4:
        raise ValueError(f"entity URN must have four segments: {urn!r}")
    entity_type, local = segments[2], segments[3]
    if not _TYPE_RE.match(entity_type):
        raise ValueError(f"bad type segment in URN: {urn!r}")
    expected = _key_prefix(entity_type) + "-"
    if not local.startswith(expected) or len(local) == len(expected):
        raise ValueError(f"local segment must start with {expected!r}: {urn!r}")
    return entity_type, local[len(expected):]


def is_entity_id(value: Any) -> bool:
    try:
        split_entity_id(value)
        return True
    except (ValueError, TypeError):
        return False


@dataclass(frozen=True)
class Attribute:
    """One named attribute value with its NGSI-LD kind.

    DateTime-valued properties hold a datetime here and serialize to the
    nested {"@type": "DateTime", "@value": ...} wire form.
    """

    kind: str
    value: Any
    observed_at: _dt.datetime | None = None

    def __post_init__(self):
        if self.kind not in ATTRIBUTE_KINDS:
            raise ValueError(f"unknown attribute kind: {self.kind!r}")

    def wire_value(self) -> Any:
        if isinstance(self.value, _dt.datetime):
            return {"@type": "DateTime", "@value": timefmt.format_wire(self.value)}
        return self.value

    def to_document(self) -> dict:
        doc: dict[str, Any] = {"value": self.wire_value(), "type": self.kind}
        if self.observed_at is not None:
            doc["observedAt"] = timefmt.format_wire(self.observed_at)
        return doc


def _parse_attribute(name: str, doc: Any) -> Attribute:
    path = f"$.{name}"
    if not isinstance(doc, Mapping):
        raise ParseError(path, "attribute must be an object")
    if "type" not in doc:
        raise ParseError(path, "attribute missing 'type'")
    kind = doc["type"]
    if kind not in ATTRIBUTE_KINDS:
        raise ParseError(path, f"unknown attribute kind {kind!r}")
    if "value" not in doc:
        raise ParseError(path, "attribute missing 'value'")
    value = doc["value"]
    if isinstance(value, Mapping) and value.get("@type") == "DateTime":
        raw = value.get("@value")
        try:
            value = timefmt.parse_wire(raw)
        except ValueError as exc:
            raise ParseError(f"{path}.value", str(exc)) from exc
    observed = None
    if "observedAt" in doc:
        try:
            observed = timefmt.parse_wire(doc["observedAt"])
        except ValueError as exc:
            raise ParseError(f"{path}.observedAt", str(exc)) from exc
    return Attribute(kind=kind, value=value, observed_at=observed)


@dataclass
class ContextEntity:
    """A URN-identified bag of attributes plus its JSON-LD context list."""

    id: str
    type: str
    attributes: dict[str, Attribute] = field(default_factory=dict)
    context: tuple[str, ...] = CORE_CONTEXT

    def attr_value(self, name: str, default: Any = None) -> Any:
        attr = self.attributes.get(name)
        return default if attr is None else attr.value

    def with_attributes(self, updates: Mapping[str, Attribute]) -> "ContextEntity":
        merged = dict(self.attributes)
        merged.update(updates)
        return ContextEntity(self.id, self.type, merged, self.context)

    def to_document(self) -> dict:
        doc: dict[str, Any] = {"id": self.id, "type": self.type}
        for name, attr in self.attributes.items():
            doc[name] = attr.to_document()
        doc["@context"] = list(self.context or CORE_CONTEXT)
        return doc


def serialize_entity(entity: ContextEntity) -> dict:
    """Emit the wire document: id, type, attributes, trailing @context."""
    return entity.to_document()


def parse_entity(document: Any) -> ContextEntity:
    """Inverse of serialize_entity; raises ParseError naming the bad field."""
    if not isinstance(document, Mapping):
        raise ParseError("$", "entity document must be a JSON object")
    if "id" not in document:
        raise ParseError("$.id", "missing entity id")
    if "type" not in document:
        raise ParseError("$.type", "missing entity type")
    entity_id = document["id"]
    try:
        split_entity_id(entity_id)
    except ValueError as exc:
        raise ParseError("$.id", str(exc)) from exc
    entity_type = document["type"]
    if not isinstance(entity_type, str) or not _TYPE_RE.match(entity_type):
        raise ParseError("$.type", f"bad entity type {entity_type!r}")
    attributes: dict[str, Attribute] = {}
    for name, value in document.items():
        if name in ("id", "type", "@context"):
            continue
        attributes[name] = _parse_attribute(name, value)
    context = document.get("@context")
    if context is None:
        context = CORE_CONTEXT
    elif isinstance(context, str):
        context = (context,)
    elif isinstance(context, Iterable):
        context = tuple(context)
    else:
        raise ParseError("$.@context", "context must be a URL or list of URLs")
    return ContextEntity(id=entity_id, type=entity_type,
                         attributes=attributes, context=context)


# Milestone chain order used by the Flight ordering invariant.
ACTUAL_CHAIN = ("dateAOBT", "dateATOT", "dateALDT", "dateAIBT")

_DURATION_FIELDS = ("dateEXOT", "dateAXOT", "dateEXIT", "dateAXIT",
                    "dateSTTT", "dateETTT", "dateATTT")

FLIGHT_STATES = ("scheduled", "active", "unknown", "redirected", "landed",
                 "diverted", "cancelled")
NOTIFICATION_STATUSES = ("active", "inactive", "completed", "unknown")


def _check_geo(name: str, attr: Attribute, violations: list[str]) -> None:
    value = attr.value
    if not isinstance(value, Mapping) or value.get("type") != "Point":
        violations.append(f"{name}: GeoProperty value must be a Point geometry")
        return
    coords = value.get("coordinates")
    if not isinstance(coords, (list, tuple)) or len(coords) not in (2, 3) \
            or not all(isinstance(c, (int, float)) for c in coords):
        violations.append(f"{name}: coordinates must be [lat, lon] or [lat, lon, alt]")
        return
    lat, lon = coords[0], coords[1]
    if not -90 <= lat <= 90:
        violations.append(f"{name}: latitude {lat} outside [-90, 90]")
    if not -180 <= lon <= 180:
        violations.append(f"{name}: longitude {lon} outside [-180, 180]")


def _flight_violations(entity: ContextEntity) -> list[str]:
    violations: list[str] = []
    actuals = {}
    for name in ACTUAL_CHAIN:
        value = entity.attr_value(name)
        if isinstance(value, _dt.datetime):
            actuals[name] = value
    chain = [name for name in ACTUAL_CHAIN if name in actuals]
    for earlier, later in zip(chain, chain[1:]):
        if actuals[earlier] > actuals[later]:
            violations.append(
                f"time ordering: {earlier} must not be after {later}")
    for derived, end, start in (("dateAXOT", "dateATOT", "dateAOBT"),
                                ("dateAXIT", "dateAIBT", "dateALDT")):
        stated = entity.attr_value(derived)
        if stated is None or end not in actuals or start not in actuals:
            continue
        expected = (actuals[end] - actuals[start]).total_seconds()
        if isinstance(stated, (int, float)) and abs(stated - expected) > 1e-9:
            violations.append(
                f"derived duration mismatch: {derived} is {stated}, "
                f"expected {expected:.0f}")
    for name in _DURATION_FIELDS:
        value = entity.attr_value(name)
        if isinstance(value, (int, float)) and value < 0:
            violations.append(f"{name}: duration must be non-negative")
    state = entity.attr_value("state")
    if state is not None and state not in FLIGHT_STATES:
        violations.append(f"state: unknown value {state!r}")
    count = entity.attr_value("passengerCount")
    if count is not None and (not isinstance(count, int) or count < 0):
        violations.append("passengerCount: must be a non-negative integer")
    return violations


def _aircraft_violations(entity: ContextEntity) -> list[str]:
    violations: list[str] = []
    try:
        _, key = split_entity_id(entity.id)
    except ValueError:
        key = None
    registration = entity.attr_value("registration")
    if registration is not None and key is not None and key != registration:
        violations.append("id: local key must equal the registration")
    heading = entity.attr_value("heading")
    if heading is not None and not 0 <= heading < 360:
        violations.append(f"heading: {heading} outside [0, 360)")
    speed = entity.attr_value("speed")
    if speed is not None and speed < 0:
        violations.append("speed: must be non-negative")
    return violations


def _notification_violations(entity: ContextEntity) -> list[str]:
    violations: list[str] = []
    status = entity.attr_value("status")
    if status is not None and status not in NOTIFICATION_STATUSES:
        violations.append(f"status: unknown value {status!r}")
    issued = entity.attr_value("dateIssued")
    modified = entity.attr_value("dateModified")
    if isinstance(issued, _dt.datetime) and isinstance(modified, _dt.datetime) \
            and modified < issued:
        violations.append("dateModified: must not precede dateIssued")
    ref = entity.attr_value("refFlight")
    if ref is not None and not is_entity_id(ref):
        violations.append("refFlight: not a valid entity URN")
    return violations


def validate_entity(entity: ContextEntity) -> list[str]:
    """Return the list of violated invariants (empty means valid)."""
    violations: list[str] = []
    try:
        urn_type, _ = split_entity_id(entity.id)
        if urn_type != entity.type:
            violations.append(
                f"id: URN type segment {urn_type!r} differs from type "
                f"{entity.type!r}")
    except ValueError as exc:
        violations.append(f"id: {exc}")
    for name, attr in entity.attributes.items():
        if attr.kind == RELATIONSHIP and not is_entity_id(attr.value):
            violations.append(f"{name}: relationship value is not an entity URN")
        elif attr.kind == GEO_PROPERTY:
            _check_geo(name, attr, violations)
    if entity.type == "Flight":
        violations.extend(_flight_violations(entity))
    elif entity.type == "Aircraft":
        violations.extend(_aircraft_violations(entity))
    elif entity.type == "FlightNotification":
        violations.extend(_notification_violations(entity))
    elif entity.type in ("AircraftModel",):
        for name in ("length", "wingspan", "height", "maximumSpeed"):
            value = entity.attr_value(name)
            if value is not None and value <= 0:
                violations.append(f"{name}: must be positive")
    elif entity.type in ("Airline", "Airport"):
        if entity.attr_value("iataCode") is None and entity.attr_value("icaoCode") is None:
            violations.append("one of iataCode/icaoCode is required")
    return violations
