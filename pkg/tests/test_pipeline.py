import json

import pytest
from hypothesis import given, strategies as st

from aerotwin.pipeline import (
    EvaluatePathsStage,
    FlowRecord,
    Pipeline,
    PipelineConfigError,
    RouteStage,
    SanitizeStage,
    SplitStage,
    UpdateAttributesStage,
    chroma_pipeline_config,
    load_pipeline_config,
    validate_pipeline_config,
)


def _run(stage, record):
    sink = []
    outputs = stage.handle(record, sink.append)
    return outputs, sink


def _capture_config(stages):
    return {"name": "t", "source": {"kind": "inline"}, "stages": stages,
            "sink": {"kind": "capture"}}


# --- split -------------------------------------------------------------------

def test_split_flight_array(chroma_feed):
    record = FlowRecord(payload=chroma_feed, source="chroma", sequence=(3,))
    outputs, failures = _run(SplitStage({"arrayPath": "$"}), record)
    assert not failures
    assert [o.payload for o in outputs] == chroma_feed
    assert [o.sequence for o in outputs] == [(3, 0), (3, 1)]


def test_split_empty_array():
    outputs, failures = _run(SplitStage({"arrayPath": "$"}),
                             FlowRecord(payload=[]))
    assert outputs == [] and not failures


def test_split_object_mode(planefinder_frame):
    record = FlowRecord(payload=planefinder_frame)
    outputs, failures = _run(SplitStage({"arrayPath": "$", "mode": "object"}),
                             record)
    assert not failures
    assert len(outputs) == 2
    assert outputs[0].attributes["key"] == "X"
    assert outputs[0].payload["adshex"] == "X"
    assert outputs[1].attributes["key"] == "Y"


def test_split_non_array_goes_to_failure():
    stage = SplitStage({"arrayPath": "$"})
    outputs, failures = _run(stage, FlowRecord(payload={"a": 1}))
    assert outputs == []
    assert failures and failures[0]["stage"] == stage.name
    assert stage.counters()["failed"] == 1


# --- evaluate_paths ----------------------------------------------------------

def test_evaluate_paths_flight(chroma_feed):
    stage = EvaluatePathsStage({"extractions": {
        "dat": "DepartureArrivalType", "orig": "OriginDestAirportIATA"}})
    outputs, _ = _run(stage, FlowRecord(payload=chroma_feed[1]))
    assert outputs[0].attributes == {"dat": "A", "orig": "SVG"}


def test_evaluate_paths_missing_field_yields_null_string():
    stage = EvaluatePathsStage({"extractions": {"x": "NoSuchField"}})
    outputs, _ = _run(stage, FlowRecord(payload={"a": 1}))
    assert outputs[0].attributes["x"] == "null"


def test_evaluate_paths_position_fields(planefinder_frame):
    stage = EvaluatePathsStage({"extractions": {
        "put": "pos_update_time", "reg": "reg"}})
    outputs, _ = _run(stage, FlowRecord(payload=planefinder_frame["X"]))
    assert outputs[0].attributes == {"put": "1612457454", "reg": "AA-AAAA"}


# --- route -------------------------------------------------------------------

def test_route_drops_null_schedule():
    stage = RouteStage({"predicate": {"op": "not_null", "attr": "sched"}})
    dropped, _ = _run(stage, FlowRecord(payload={}, attributes={"sched": "null"}))
    passed, _ = _run(stage, FlowRecord(
        payload={}, attributes={"sched": "2021-02-04T17:20:00+00:00"}))
    assert dropped == []
    assert len(passed) == 1
    assert stage.counters() == {"in": 2, "out": 1, "dropped": 1, "failed": 0,
                                "emitted": 1}


def test_route_on_route_endpoint():
    predicate = {"op": "and", "terms": [
        {"op": "route_endpoint", "attr": "route", "value": "ABZ"},
        {"op": "not_null", "attr": "fn"},
    ]}
    stage = RouteStage({"predicate": predicate})
    away, _ = _run(stage, FlowRecord(
        payload={}, attributes={"route": "SVG-AXZ", "fn": "SK1234"}))
    toward, _ = _run(stage, FlowRecord(
        payload={}, attributes={"route": "SVG-ABZ", "fn": "SK1234"}))
    unnumbered, _ = _run(stage, FlowRecord(
        payload={}, attributes={"route": "SVG-ABZ", "fn": "null"}))
    assert away == [] and unnumbered == []
    assert len(toward) == 1


def test_malformed_predicate_rejected_at_load():
    config = _capture_config([
        {"kind": "route", "predicate": {"op": "sometimes", "attr": "x"}}])
    with pytest.raises(PipelineConfigError) as err:
        load_pipeline_config(config)
    assert any("unknown predicate op" in p for p in err.value.problems)


def test_predicate_over_undeclared_attribute_rejected():
    config = _capture_config([
        {"kind": "route", "predicate": {"op": "not_null", "attr": "ghost"}}])
    problems = validate_pipeline_config(config)
    assert any("undeclared attribute 'ghost'" in p for p in problems)


# --- update_attributes -------------------------------------------------------

def _airport_rules():
    return [
        {"set": "arrivesToAirport", "when": {"attr": "dat", "equals": "A"},
         "value": "ABZ"},
        {"set": "departsFromAirport", "when": {"attr": "dat", "equals": "A"},
         "from": "orig"},
        {"set": "arrivesToAirport", "when": {"attr": "dat", "equals": "D"},
         "from": "orig"},
        {"set": "departsFromAirport", "when": {"attr": "dat", "equals": "D"},
         "value": "ABZ"},
    ]


def test_update_attributes_arrival_branch():
    stage = UpdateAttributesStage({"rules": _airport_rules()})
    outputs, _ = _run(stage, FlowRecord(
        payload={}, attributes={"dat": "A", "orig": "SVG"}))
    attrs = outputs[0].attributes
    assert attrs["arrivesToAirport"] == "ABZ"
    assert attrs["departsFromAirport"] == "SVG"


def test_update_attributes_departure_branch():
    stage = UpdateAttributesStage({"rules": _airport_rules()})
    outputs, _ = _run(stage, FlowRecord(
        payload={}, attributes={"dat": "D", "orig": "SVG"}))
    attrs = outputs[0].attributes
    assert attrs["arrivesToAirport"] == "SVG"
    assert attrs["departsFromAirport"] == "ABZ"


def test_update_attributes_strip_and_epoch():
    stage = UpdateAttributesStage({"rules": [
        {"set": "reg", "from": "reg", "strip": "-"},
        {"set": "dateIssued", "from": "put", "epoch_to_iso": True},
    ]})
    outputs, _ = _run(stage, FlowRecord(
        payload={}, attributes={"reg": "AA-AAAA", "put": "1612457454"}))
    attrs = outputs[0].attributes
    assert attrs["reg"] == "AAAAAA"
    assert attrs["dateIssued"] == "2021-02-04T16:50:54.00Z"


def test_update_attributes_prefix_rules():
    stage = UpdateAttributesStage({"rules": [
        {"set": "flightNumber", "from": "fn", "strip_prefix": "alpha"},
        {"set": "airlineIATA", "from": "fn", "take_prefix": "alpha"},
    ]})
    outputs, _ = _run(stage, FlowRecord(payload={}, attributes={"fn": "SK1234"}))
    assert outputs[0].attributes["flightNumber"] == "1234"
    assert outputs[0].attributes["airlineIATA"] == "SK"


def test_update_attributes_epoch_on_non_numeric_fails():
    stage = UpdateAttributesStage({"rules": [
        {"set": "dateIssued", "from": "put", "epoch_to_iso": True}]})
    outputs, failures = _run(stage, FlowRecord(
        payload={}, attributes={"put": "not-a-number"}))
    assert outputs == []
    assert failures and "epoch" in failures[0]["reason"]


def test_update_attributes_leaves_payload_untouched(chroma_feed):
    stage = UpdateAttributesStage({"rules": _airport_rules()})
    record = FlowRecord(payload=chroma_feed[1],
                        attributes={"dat": "A", "orig": "SVG"})
    outputs, _ = _run(stage, record)
    assert outputs[0].payload is record.payload


# --- sanitize ----------------------------------------------------------------

def test_sanitize_strips_forbidden_characters():
    stage = SanitizeStage()
    outputs, _ = _run(stage, FlowRecord(payload={"v": "A(1)=B;"}))
    assert outputs[0].payload["v"] == "A1B"


def test_sanitize_keeps_clean_document(flight_entity_doc):
    outputs, _ = _run(SanitizeStage(), FlowRecord(payload=flight_entity_doc))
    assert outputs[0].payload == flight_entity_doc


def test_sanitize_rejects_forbidden_name():
    outputs, failures = _run(SanitizeStage(),
                             FlowRecord(payload={"bad;name": 1}))
    assert outputs == []
    assert failures and "attribute name" in failures[0]["reason"]


@given(st.text(max_size=40))
def test_sanitize_matches_character_filter_oracle(text):
    forbidden = set('<>"\'=;()')
    outputs, _ = _run(SanitizeStage(), FlowRecord(payload={"v": text}))
    assert outputs[0].payload["v"] == "".join(
        ch for ch in text if ch not in forbidden)


# --- runner ------------------------------------------------------------------

def test_counters_conserved_via_golden_run(chroma_feed):
    config = chroma_pipeline_config(broker_url="")
    config["sink"] = {"kind": "capture"}
    pipeline = Pipeline(config)
    pipeline.execute([FlowRecord(payload=chroma_feed, source="chroma")])
    for name, counts in pipeline.counters()["stages"].items():
        assert counts["in"] == counts["out"] + counts["dropped"] + counts["failed"], name


def test_empty_source_means_zero_sink_calls():
    config = chroma_pipeline_config(broker_url="")
    config["sink"] = {"kind": "capture"}
    pipeline = Pipeline(config)
    assert pipeline.execute([]) == []
    counters = pipeline.counters()
    assert counters["sink"] == {"delivered": 0, "failed": 0}
    assert counters["deadLetters"] == 0


def test_thousand_flights_half_null_schedule():
    flights = []
    for i in range(1000):
        sched = None if i % 2 == 0 else "2021-02-04T10:00:00+00:00"
        flights.append({
            "id": i + 1, "FlightNumber": str(1000 + i), "AirlineIATA": "SK",
            "DepartureArrivalType": "A", "OriginDestAirportIATA": "SVG",
            "OriginDestAirportICAO": "ENZV", "Registration": f"REG{i:04d}",
            "StandCode": "01", "GateCode": "01", "ALDT": None, "AIBT": None,
            "AOBT": None, "TOBT": None, "ScheduledDateTime": sched,
        })
    config = chroma_pipeline_config(broker_url="")
    config["sink"] = {"kind": "capture"}
    pipeline = Pipeline(config)
    delivered = pipeline.execute([FlowRecord(payload=flights, source="chroma")])
    assert len(delivered) == 500
    stages = pipeline.counters()["stages"]
    route = next(c for n, c in stages.items() if n.startswith("route"))
    assert route["dropped"] == 500
    assert pipeline.counters()["sink"]["delivered"] == 500


def test_replay_is_byte_identical(chroma_feed):
    def run_once():
        config = chroma_pipeline_config(broker_url="")
        config["sink"] = {"kind": "capture"}
        pipeline = Pipeline(config)
        return json.dumps(
            pipeline.execute([FlowRecord(payload=chroma_feed)]), sort_keys=True)
    assert run_once() == run_once()


def test_threaded_pipeline_preserves_order():
    config = _capture_config([
        {"kind": "evaluate_paths", "extractions": {"n": "n"}},
        {"kind": "route", "predicate": {"op": "not_null", "attr": "n"}},
    ])
    pipeline = Pipeline(config)
    pipeline.start()
    for i in range(200):
        pipeline.submit(FlowRecord(payload={"n": i}, sequence=(i,)))
    pipeline.stop()
    assert [p["n"] for p in pipeline.captured] == list(range(200))


def test_threaded_chroma_posts_exactly_one_entity(chroma_feed,
                                                  flight_entity_doc):
    from stubs import CaptureEndpoint, assert_documents_match
    with CaptureEndpoint() as broker:
        pipeline = Pipeline(chroma_pipeline_config(broker_url=broker.url))
        pipeline.start()
        pipeline.submit(FlowRecord(payload=chroma_feed, source="chroma"))
        pipeline.stop()
        assert len(broker.received) == 1
        assert_documents_match(broker.received[0], flight_entity_doc)


def test_config_requires_source_and_sink():
    problems = validate_pipeline_config({"stages": []})
    assert any("source" in p for p in problems)
    assert any("sink" in p for p in problems)


def test_config_rejects_unknown_stage_kind():
    problems = validate_pipeline_config(_capture_config([{"kind": "teleport"}]))
    assert any("unknown stage kind" in p for p in problems)
