"""Deterministic airport simulator: scripted traffic served as live feeds."""

from . import feedgen, geo
from .clock import SimClock
from .feedgen import (
    aircraft_state,
    decode_frame,
    encode_frame,
    frame_at,
    frame_message,
    serve_schedule,
)
from .scenario import (
    AIRPORTS,
    MILESTONE_NAMES,
    ScenarioScript,
    ScriptedFlight,
    TrackPlan,
    demo_turnaround_script,
    generate_scenario,
    load_script,
    save_script,
    validate_script,
)
from .server import SimulatorServer, TOKEN_HEADER

__all__ = [
    "AIRPORTS", "MILESTONE_NAMES", "ScenarioScript", "ScriptedFlight",
    "SimClock", "SimulatorServer", "TOKEN_HEADER", "TrackPlan",
    "aircraft_state", "decode_frame", "demo_turnaround_script",
    "encode_frame", "feedgen", "frame_at", "frame_message",
    "generate_scenario", "geo", "load_script", "save_script",
    "serve_schedule", "validate_script",
]
