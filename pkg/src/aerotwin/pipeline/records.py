"""Flow records: the unit of data moving through a pipeline."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class FlowRecord:
    """A payload document plus routing attributes and provenance.

    sequence is a tuple so splits can extend it with the element index while
    keeping per-source ordering comparable.
    """

    payload: Any
    attributes: dict[str, str] = field(default_factory=dict)
    source: str = "anonymous"
    sequence: tuple[int, ...] = (0,)

    def child(self, index: int, payload: Any, extra: dict[str, str] | None = None) -> "FlowRecord":
        attrs = dict(self.attributes)
        if extra:
            attrs.update(extra)
        return FlowRecord(payload=payload, attributes=attrs,
                          source=self.source, sequence=self.sequence + (index,))

    def with_attributes(self, updates: dict[str, str]) -> "FlowRecord":
        attrs = dict(self.attributes)
        attrs.update(updates)
        return FlowRecord(payload=self.payload, attributes=attrs,
                          source=self.source, sequence=self.sequence)

    def with_payload(self, payload: Any) -> "FlowRecord":
        return FlowRecord(payload=payload, attributes=dict(self.attributes),
                          source=self.source, sequence=self.sequence)

    def to_line(self) -> str:
        return json.dumps({
            "payload": self.payload,
            "attributes": self.attributes,
            "source": self.source,
            "sequence": list(self.sequence),
        })

    @classmethod
    def from_capture(cls, value: Any, default_seq: int = 0) -> "FlowRecord":
        """Build a record from one capture-file line.

        A structured object with a "payload" key restores full provenance;
        any other JSON value is taken as a bare payload.
        """
        if isinstance(value, dict) and "payload" in value:
            return cls(
                payload=value["payload"],
                attributes=dict(value.get("attributes") or {}),
                source=value.get("source", "capture"),
                sequence=tuple(value.get("sequence") or (default_seq,)),
            )
        return cls(payload=value, source="capture", sequence=(default_seq,))


def render_value(value: Any) -> str:
    """String rendition of a JSON value for routing attributes."""
    if value is None:
        return "null"
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    return json.dumps(value)
