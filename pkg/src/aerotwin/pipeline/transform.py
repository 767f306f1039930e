"""Declarative document transformation to the NGSI wire shape.

A TransformSpec lists ordered field rules. Each rule names an output
attribute, where its value comes from (payload path, routing attribute,
constant, or a concatenation template), how to tag it (Property,
Relationship with URN construction, GeoProperty, DateTime), and an optional
unit conversion.
"""
from __future__ import annotations

from typing import Any, Mapping

from ..model import CORE_CONTEXT, make_entity_id, timefmt
from .records import FlowRecord

FT_TO_M = 0.3048
KN_TO_KMH = 1.852
# survey-foot variant: plain 0.00508 drifts 2e-6 off the reference feed
# output (-1856 ft/min must print -9.428499 m/s)
FTMIN_TO_MS = 1200.0 / 3937.0 / 60.0

CONVERSIONS = {
    "ft_to_m": FT_TO_M,
    "kn_to_kmh": KN_TO_KMH,
    "ftmin_to_ms": FTMIN_TO_MS,
}

_ROUND_DIGITS = 6


class TransformFailure(Exception):
    """A record cannot be transformed; routed to the failure path."""


def resolve_path(document: Any, path: str) -> Any:
    """Resolve a dotted path ("a.b[0].c", optionally "$." prefixed)."""
    current = document
    trimmed = path[2:] if path.startswith("$.") else path
    if trimmed in ("$", ""):
        return current
    for segment in trimmed.split("."):
        name, indices = segment, []
        while name.endswith("]"):
            name, _, idx = name[:-1].rpartition("[")
            indices.insert(0, idx)
        if name:
            if not isinstance(current, Mapping) or name not in current:
                return None
            current = current[name]
        for idx in indices:
            try:
                current = current[int(idx)]
            except (IndexError, TypeError, ValueError):
                return None
    return current


def _lookup(record: FlowRecord, ref: str) -> Any:
    """Fetch a value by reference: "payload:<path>" or "attr:<name>"."""
    scheme, _, rest = ref.partition(":")
    if scheme == "payload":
        return resolve_path(record.payload, rest)
    if scheme == "attr":
        value = record.attributes.get(rest)
        return None if value in (None, "null") else value
    raise ValueError(f"bad value reference {ref!r}")


def _first_present(record: FlowRecord, refs: list[str]) -> Any:
    for ref in refs:
        value = _lookup(record, ref)
        if value is not None:
            return value
    return None


def _convert(value: Any, conversion: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise TransformFailure(f"cannot convert non-numeric value {value!r}")
    return round(number * CONVERSIONS[conversion], _ROUND_DIGITS)


def _rule_value(record: FlowRecord, rule: Mapping) -> Any:
    if "value" in rule:
        value = rule["value"]
    elif "template" in rule:
        parts = []
        for piece in rule["template"]["concat"]:
            if isinstance(piece, Mapping):
                fetched = _lookup(record, piece["from"]) if "from" in piece \
                    else piece.get("const")
            else:
                fetched = _lookup(record, piece)
            if fetched is None:
                return None
            parts.append(str(fetched))
        value = "".join(parts)
    else:
        refs = rule["from"]
        if isinstance(refs, str):
            refs = [refs]
        value = _first_present(record, refs)
    if value is None:
        return None
    mapping = rule.get("map")
    if mapping is not None:
        value = mapping.get(str(value), rule.get("mapDefault"))
        if value is None:
            return None
    if "convert" in rule:
        value = _convert(value, rule["convert"])
    return value


def _wire_datetime(value: Any) -> dict:
    if not isinstance(value, str):
        raise TransformFailure(f"DateTime field needs a string, got {value!r}")
    try:
        parsed = timefmt.parse_wire(value)
    except ValueError as exc:
        raise TransformFailure(str(exc))
    return {"@type": "DateTime", "@value": timefmt.format_wire(parsed)}


def _geometry_value(record: FlowRecord, geometry: Mapping) -> dict:
    coordinates = []
    for piece in geometry["coordinates"]:
        if isinstance(piece, Mapping):
            value = _rule_value(record, piece)
        else:
            value = _lookup(record, piece)
        if value is None:
            raise TransformFailure("geometry coordinate missing from source")
        if not isinstance(value, (int, float)):
            raise TransformFailure(f"geometry coordinate not numeric: {value!r}")
        coordinates.append(value)
    return {"type": geometry.get("type", "Point"), "coordinates": coordinates}


def apply_transform(record: FlowRecord, spec: Mapping) -> FlowRecord:
    """Replace the payload with the NGSI document described by the spec.

    Raises TransformFailure when a required source value is absent or a
    conversion cannot be applied; the caller routes those to failure.
    """
    if spec.get("identity"):
        return record
    id_rule = spec["id"]
    local_key = _rule_value(record, id_rule)
    if local_key is None:
        raise TransformFailure("entity id source value missing")
    entity_type = spec["entityType"]
    document: dict[str, Any] = {
        "id": make_entity_id(entity_type, str(local_key)),
        "type": entity_type,
    }
    for rule in spec.get("fields", []):
        name = rule["name"]
        kind = rule.get("kind", "Property")
        if kind == "GeoProperty":
            value = _geometry_value(record, rule["geometry"])
        else:
            value = _rule_value(record, rule)
            if value is None:
                if rule.get("required"):
                    raise TransformFailure(f"required field {name} missing")
                continue
            if kind == "Relationship":
                value = make_entity_id(rule["relationshipType"], str(value))
            elif rule.get("datetime"):
                value = _wire_datetime(value)
        document[name] = {"value": value, "type": kind}
    document["@context"] = list(CORE_CONTEXT)
    return record.with_payload(document)


def validate_transform_spec(spec: Any) -> list[str]:
    """Static checks; returns problems (empty = valid)."""
    problems: list[str] = []
    if not isinstance(spec, Mapping):
        return ["transform spec must be an object"]
    if spec.get("identity"):
        return problems
    if "entityType" not in spec:
        problems.append("transform spec missing entityType")
    if "id" not in spec:
        problems.append("transform spec missing id rule")
    seen: set[str] = set()
    for rule in spec.get("fields", []):
        name = rule.get("name")
        if not name:
            problems.append("field rule missing name")
            continue
        if name in seen:
            problems.append(f"duplicate output field {name}")
        seen.add(name)
        kind = rule.get("kind", "Property")
        if kind not in ("Property", "Relationship", "GeoProperty"):
            problems.append(f"{name}: unknown kind {kind}")
        if kind == "Relationship" and "relationshipType" not in rule:
            problems.append(f"{name}: relationship rule needs relationshipType")
        if kind == "GeoProperty" and "geometry" not in rule:
            problems.append(f"{name}: geo rule needs geometry")
        conversion = rule.get("convert")
        if conversion is not None and conversion not in CONVERSIONS:
            problems.append(f"{name}: unknown conversion {conversion}")
        if kind != "GeoProperty" and not any(
                k in rule for k in ("from", "value", "template")):
            problems.append(f"{name}: needs one of from/value/template")
    return problems
