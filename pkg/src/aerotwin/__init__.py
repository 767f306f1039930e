"""aerotwin: an airport digital-twin platform.

Ingests flight-schedule and aircraft-position feeds through configurable
processor pipelines, homogenises them into NGSI-LD-style context entities,
serves current state through a publish-subscribe context broker, persists
history, and computes A-CDM turnaround timings and delay status.
"""

__version__ = "0.1.0"
