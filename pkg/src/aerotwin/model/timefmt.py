"""Timestamp handling for the wire format.

Entities carry DateTime values as ISO 8601 UTC strings with a fixed two-digit
zero fraction, e.g. "2021-02-04T17:20:00.00Z". Inputs are more permissive:
offsets, bare "Z", or fractional seconds all parse.
"""
from __future__ import annotations

import datetime as _dt
import re

UTC = _dt.timezone.utc

_WIRE_SUFFIX = ".00Z"
_FRACTION_RE = re.compile(r"\.(\d{1,6})(?=[+-]|$)")


def format_wire(ts: _dt.datetime) -> str:
    """Render a datetime in the wire shape "%Y-%m-%dT%H:%M:%S.00Z" (UTC)."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=UTC)
    ts = ts.astimezone(UTC)
    return ts.strftime("%Y-%m-%dT%H:%M:%S") + _WIRE_SUFFIX


def parse_wire(text: str) -> _dt.datetime:
    """Parse an ISO 8601 timestamp into an aware UTC datetime.

    Accepts "+00:00" offsets, trailing "Z", and fractional seconds.
    Raises ValueError for anything else.
    """
    if not isinstance(text, str) or not text:
        raise ValueError(f"not a timestamp: {text!r}")
    candidate = text.strip()
    if candidate.endswith("Z"):
        candidate = candidate[:-1] + "+00:00"
    # fromisoformat on 3.10 only takes 3- or 6-digit fractions; pad to 6
    match = _FRACTION_RE.search(candidate)
    if match:
        digits = match.group(1)
        candidate = (candidate[:match.start()] + "." + digits.ljust(6, "0")
                     + candidate[match.end():])
    parsed = _dt.datetime.fromisoformat(candidate)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=UTC)
    return parsed.astimezone(UTC)


def epoch_to_wire(epoch_seconds: float) -> str:
    """Convert a Unix epoch (seconds) to the wire timestamp string."""
    return format_wire(_dt.datetime.fromtimestamp(float(epoch_seconds), UTC))


def to_epoch(ts: _dt.datetime) -> float:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=UTC)
    return ts.timestamp()
