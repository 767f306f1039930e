"""Reusable pipeline processors.

Every stage classifies each incoming record exactly once: passed on,
dropped, or failed, so the per-stage counters always satisfy
in == out + dropped + failed. Splits expose the fan-out separately
through the emitted counter.
"""
from __future__ import annotations

import threading
from typing import Any, Callable, Mapping

from ..model import timefmt
from .records import FlowRecord, render_value
from .transform import TransformFailure, apply_transform, resolve_path

FORBIDDEN_VALUE_CHARS = set('<>"\'=;()')

DeadLetter = Callable[[dict], None]


class StageFailure(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class Stage:
    kind = "stage"

    def __init__(self, params: Mapping | None = None, name: str | None = None):
        self.params = dict(params or {})
        self.name = name or self.kind
        self._lock = threading.Lock()
        self.in_count = 0
        self.out_count = 0
        self.dropped = 0
        self.failed = 0
        self.emitted = 0

    def counters(self) -> dict:
        with self._lock:
            return {"in": self.in_count, "out": self.out_count,
                    "dropped": self.dropped, "failed": self.failed,
                    "emitted": self.emitted}

    def handle(self, record: FlowRecord, dead_letter: DeadLetter) -> list[FlowRecord]:
        with self._lock:
            self.in_count += 1
        try:
            outputs = self.apply(record)
        except (StageFailure, TransformFailure) as exc:
            with self._lock:
                self.failed += 1
            dead_letter({"stage": self.name, "reason": str(exc),
                         "source": record.source,
                         "sequence": list(record.sequence)})
            return []
        if outputs is None:
            with self._lock:
                self.dropped += 1
            return []
        with self._lock:
            self.out_count += 1
            self.emitted += len(outputs)
        return outputs

    def apply(self, record: FlowRecord) -> list[FlowRecord] | None:
        """Return output records, or None to drop the input."""
        raise NotImplementedError


class SplitStage(Stage):
    """SplitJson: fan an array (or an object keyed by id) into one record
    per element, extending the sequence with the element index."""

    kind = "split"

    def apply(self, record: FlowRecord):
        path = self.params.get("arrayPath", "$")
        mode = self.params.get("mode", "array")
        target = resolve_path(record.payload, path)
        if mode == "object":
            if not isinstance(target, Mapping):
                raise StageFailure(f"path {path} is not an object")
            return [record.child(i, value, {"key": str(key)})
                    for i, (key, value) in enumerate(target.items())]
        if not isinstance(target, list):
            raise StageFailure(f"path {path} is not an array")
        return [record.child(i, element) for i, element in enumerate(target)]


class EvaluatePathsStage(Stage):
    """EvaluateJsonPath: pull payload values into routing attributes.
    Unresolved paths yield the string "null"."""

    kind = "evaluate_paths"

    def apply(self, record: FlowRecord):
        extracted = {
            attr: render_value(resolve_path(record.payload, path))
            for attr, path in self.params["extractions"].items()
        }
        return [record.with_attributes(extracted)]


def _attr_present(record: FlowRecord, name: str) -> bool:
    value = record.attributes.get(name)
    return value is not None and value != "null"


def evaluate_predicate(predicate: Mapping, record: FlowRecord) -> bool:
    op = predicate["op"]
    if op == "and":
        return all(evaluate_predicate(t, record) for t in predicate["terms"])
    if op == "or":
        return any(evaluate_predicate(t, record) for t in predicate["terms"])
    if op == "not":
        return not evaluate_predicate(predicate["term"], record)
    if op == "not_null":
        return _attr_present(record, predicate["attr"])
    if op == "equals":
        return record.attributes.get(predicate["attr"]) == predicate["value"]
    if op == "route_endpoint":
        value = record.attributes.get(predicate["attr"])
        if value is None or value == "null":
            return False
        return predicate["value"] in value.split("-")
    raise StageFailure(f"unknown predicate op {op}")


def predicate_problems(predicate: Any, declared: set[str]) -> list[str]:
    """Static predicate validation against the attributes declared upstream."""
    problems: list[str] = []
    if not isinstance(predicate, Mapping) or "op" not in predicate:
        return ["predicate must be an object with an 'op'"]
    op = predicate["op"]
    if op in ("and", "or"):
        terms = predicate.get("terms")
        if not isinstance(terms, list) or not terms:
            problems.append(f"'{op}' needs a non-empty terms list")
        else:
            for term in terms:
                problems.extend(predicate_problems(term, declared))
    elif op == "not":
        problems.extend(predicate_problems(predicate.get("term"), declared))
    elif op in ("not_null", "equals", "route_endpoint"):
        attr = predicate.get("attr")
        if not attr:
            problems.append(f"'{op}' needs an attr")
        elif attr not in declared:
            problems.append(f"predicate references undeclared attribute {attr!r}")
        if op in ("equals", "route_endpoint") and "value" not in predicate:
            problems.append(f"'{op}' needs a value")
    else:
        problems.append(f"unknown predicate op {op!r}")
    return problems


class RouteStage(Stage):
    """RouteOnAttribute: pass records matching the predicate, count drops."""

    kind = "route"

    def apply(self, record: FlowRecord):
        if evaluate_predicate(self.params["predicate"], record):
            return [record]
        return None


def _strip_alpha_prefix(value: str) -> str:
    index = 0
    while index < len(value) and value[index].isalpha():
        index += 1
    return value[index:]


def _take_alpha_prefix(value: str) -> str:
    return value[: len(value) - len(_strip_alpha_prefix(value))]


class UpdateAttributesStage(Stage):
    """UpdateAttribute: rewrite routing attributes by rule list.

    Rule verbs: conditional assignment (when/value or when/from), character
    strip, alphabetic prefix removal or capture, and epoch→ISO 8601.
    """

    kind = "update_attributes"

    def apply(self, record: FlowRecord):
        attrs = dict(record.attributes)
        for rule in self.params["rules"]:
            condition = rule.get("when")
            if condition is not None:
                if attrs.get(condition["attr"]) != condition["equals"]:
                    continue
            if "value" in rule:
                value = rule["value"]
            else:
                value = attrs.get(rule["from"], "null")
                if rule.get("strip"):
                    for char in rule["strip"]:
                        value = value.replace(char, "")
                if rule.get("strip_prefix") == "alpha":
                    value = _strip_alpha_prefix(value)
                if rule.get("take_prefix") == "alpha":
                    value = _take_alpha_prefix(value)
                if rule.get("epoch_to_iso"):
                    try:
                        value = timefmt.epoch_to_wire(float(value))
                    except (TypeError, ValueError):
                        raise StageFailure(
                            f"epoch conversion on non-numeric {value!r}")
            attrs[rule["set"]] = value
        return [record.with_attributes(attrs)]


UPDATE_RULE_KEYS = {"set", "when", "value", "from", "strip", "strip_prefix",
                    "take_prefix", "epoch_to_iso"}


def update_rule_problems(rules: Any) -> list[str]:
    problems: list[str] = []
    if not isinstance(rules, list):
        return ["rules must be a list"]
    for i, rule in enumerate(rules):
        label = f"rule {i}"
        if not isinstance(rule, Mapping) or "set" not in rule:
            problems.append(f"{label}: needs a 'set' target")
            continue
        unknown = set(rule) - UPDATE_RULE_KEYS
        if unknown:
            problems.append(f"{label}: unknown keys {sorted(unknown)}")
        if "value" not in rule and "from" not in rule:
            problems.append(f"{label}: needs 'value' or 'from'")
        when = rule.get("when")
        if when is not None and ("attr" not in when or "equals" not in when):
            problems.append(f"{label}: 'when' needs attr and equals")
    return problems


class TransformStage(Stage):
    """JoltTransformJson-style structural mapping to the NGSI wire shape."""

    kind = "transform"

    def apply(self, record: FlowRecord):
        return [apply_transform(record, self.params["spec"])]


def _sanitize_value(value: Any, path: str):
    if isinstance(value, str):
        return "".join(ch for ch in value if ch not in FORBIDDEN_VALUE_CHARS)
    if isinstance(value, Mapping):
        cleaned = {}
        for key, inner in value.items():
            if any(ch in FORBIDDEN_VALUE_CHARS for ch in key):
                raise StageFailure(
                    f"forbidden character in attribute name {key!r} at {path}")
            cleaned[key] = _sanitize_value(inner, f"{path}.{key}")
        return cleaned
    if isinstance(value, list):
        return [_sanitize_value(v, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


class SanitizeStage(Stage):
    """ReplaceText_Sanetize: drop reserved characters from string values;
    a reserved character inside an attribute name fails the record."""

    kind = "sanitize"

    def apply(self, record: FlowRecord):
        return [record.with_payload(_sanitize_value(record.payload, "$"))]


STAGE_KINDS: dict[str, type[Stage]] = {
    cls.kind: cls
    for cls in (SplitStage, EvaluatePathsStage, RouteStage,
                UpdateAttributesStage, TransformStage, SanitizeStage)
}
