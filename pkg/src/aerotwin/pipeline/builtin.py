"""The two shipped pipeline configurations: flight schedule and positions."""
from __future__ import annotations


def chroma_pipeline_config(broker_url: str, source_url: str = "",
                           airport_iata: str = "ABZ",
                           poll_seconds: float = 60.0) -> dict:
    """Schedule feed chain: poll REST, split, route on ScheduledDateTime,
    build airport attributes, map to Flight entities, sanitize, POST."""
    return {
        "name": "chroma",
        "source": {"kind": "rest_poll", "url": source_url,
                   "intervalSeconds": poll_seconds},
        "stages": [
            {"kind": "split", "arrayPath": "$"},
            {"kind": "evaluate_paths", "extractions": {
                "dat": "DepartureArrivalType",
                "orig": "OriginDestAirportIATA",
                "sched": "ScheduledDateTime",
            }},
            {"kind": "route", "predicate": {"op": "not_null", "attr": "sched"}},
            {"kind": "update_attributes", "rules": [
                {"set": "arrivesToAirport",
                 "when": {"attr": "dat", "equals": "A"}, "value": airport_iata},
                {"set": "departsFromAirport",
                 "when": {"attr": "dat", "equals": "A"}, "from": "orig"},
                {"set": "arrivesToAirport",
                 "when": {"attr": "dat", "equals": "D"}, "from": "orig"},
                {"set": "departsFromAirport",
                 "when": {"attr": "dat", "equals": "D"}, "value": airport_iata},
            ]},
            {"kind": "transform", "spec": {
                "entityType": "Flight",
                "id": {"from": ["payload:id", "payload:FlightNumber"]},
                "fields": [
                    {"name": "flightNumber", "from": "payload:FlightNumber",
                     "required": True},
                    {"name": "belongsToAirline", "kind": "Relationship",
                     "relationshipType": "Airline", "from": "payload:AirlineIATA"},
                    {"name": "departsFromAirport", "kind": "Relationship",
                     "relationshipType": "Airport", "from": "attr:departsFromAirport"},
                    {"name": "arrivesToAirport", "kind": "Relationship",
                     "relationshipType": "Airport", "from": "attr:arrivesToAirport"},
                    {"name": "hasAircraft", "kind": "Relationship",
                     "relationshipType": "Aircraft", "from": "payload:Registration"},
                    {"name": "standCode", "from": "payload:StandCode"},
                    {"name": "gateCode", "from": "payload:GateCode"},
                    {"name": "dateALDT", "from": "payload:ALDT", "datetime": True},
                    {"name": "dateAIBT", "from": "payload:AIBT", "datetime": True},
                    {"name": "dateAOBT", "from": "payload:AOBT", "datetime": True},
                    {"name": "dateTOBT", "from": "payload:TOBT", "datetime": True},
                    {"name": "dateScheduled", "from": "payload:ScheduledDateTime",
                     "datetime": True},
                ],
            }},
            {"kind": "sanitize"},
        ],
        "sink": {"kind": "broker_post", "url": broker_url},
    }


def positions_pipeline_config(broker_url: str, host: str = "127.0.0.1",
                              port: int = 0,
                              airport_iata: str = "ABZ") -> dict:
    """Position feed chain: TCP stream, object split, route on route endpoint
    and flight number, normalise reg/number/timestamp, map to Aircraft."""
    return {
        "name": "positions",
        "source": {"kind": "tcp_stream", "host": host, "port": port},
        "stages": [
            {"kind": "split", "arrayPath": "$", "mode": "object"},
            {"kind": "evaluate_paths", "extractions": {
                "fn": "flight_number",
                "put": "pos_update_time",
                "reg": "reg",
                "route": "route",
            }},
            {"kind": "route", "predicate": {"op": "and", "terms": [
                {"op": "route_endpoint", "attr": "route", "value": airport_iata},
                {"op": "not_null", "attr": "fn"},
            ]}},
            {"kind": "update_attributes", "rules": [
                {"set": "reg", "from": "reg", "strip": "-"},
                {"set": "flightNumber", "from": "fn", "strip_prefix": "alpha"},
                {"set": "airlineIATA", "from": "fn", "take_prefix": "alpha"},
                {"set": "dateIssued", "from": "put", "epoch_to_iso": True},
            ]},
            {"kind": "transform", "spec": {
                "entityType": "Aircraft",
                "id": {"from": "attr:reg"},
                "fields": [
                    {"name": "flightNumber", "from": "attr:flightNumber",
                     "required": True},
                    {"name": "flightNumberIATA", "template": {"concat": [
                        {"from": "attr:airlineIATA"},
                        {"from": "attr:flightNumber"},
                    ]}},
                    {"name": "adshex", "from": "payload:adshex"},
                    {"name": "location", "kind": "GeoProperty", "geometry": {
                        "type": "Point",
                        "coordinates": [
                            "payload:lat",
                            "payload:lon",
                            {"from": "payload:altitude", "convert": "ft_to_m"},
                        ],
                    }},
                    {"name": "heading", "from": "payload:heading"},
                    {"name": "speed", "from": "payload:speed",
                     "convert": "kn_to_kmh"},
                    {"name": "verticalSpeed", "from": "payload:vert_rate",
                     "convert": "ftmin_to_ms"},
                    {"name": "isOnGround", "from": "payload:is_on_ground"},
                    {"name": "dateIssued", "from": "attr:dateIssued",
                     "datetime": True},
                ],
            }},
            {"kind": "sanitize"},
        ],
        "sink": {"kind": "broker_post", "url": broker_url},
    }
