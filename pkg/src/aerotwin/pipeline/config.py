"""Pipeline configuration: one JSON document per pipeline.

Shape:
    {
      "name": "chroma",
      "source": {"kind": "rest_poll" | "tcp_stream" | "inline", ...},
      "stages": [{"kind": "split", ...}, ...],
      "sink": {"kind": "broker_post", "url": ...} | {"kind": "capture"}
    }

Static validation enumerates every problem (unknown stage kinds, malformed
predicates, predicates over undeclared attributes, bad transform specs)
before anything runs.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .processors import (
    STAGE_KINDS,
    Stage,
    predicate_problems,
    update_rule_problems,
)
from .transform import validate_transform_spec

SOURCE_KINDS = {
    "rest_poll": {"url"},
    "tcp_stream": {"host", "port"},
    "inline": set(),
}
SINK_KINDS = {
    "broker_post": {"url"},
    "capture": set(),
}


class PipelineConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _endpoint_problems(section: Any, kinds: Mapping[str, set], label: str) -> list[str]:
    if not isinstance(section, Mapping) or "kind" not in section:
        return [f"{label} must be an object with a 'kind'"]
    kind = section["kind"]
    if kind not in kinds:
        return [f"unknown {label} kind {kind!r}"]
    missing = kinds[kind] - set(section)
    return [f"{label} {kind} missing parameter {name!r}" for name in sorted(missing)]


def validate_pipeline_config(doc: Any) -> list[str]:
    problems: list[str] = []
    if not isinstance(doc, Mapping):
        return ["pipeline config must be a JSON object"]
    problems.extend(_endpoint_problems(doc.get("source"), SOURCE_KINDS, "source"))
    problems.extend(_endpoint_problems(doc.get("sink"), SINK_KINDS, "sink"))
    stages = doc.get("stages")
    if not isinstance(stages, list):
        problems.append("stages must be a list")
        return problems
    declared: set[str] = set()
    for i, spec in enumerate(stages):
        label = f"stage {i}"
        if not isinstance(spec, Mapping) or "kind" not in spec:
            problems.append(f"{label}: must be an object with a 'kind'")
            continue
        kind = spec["kind"]
        if kind not in STAGE_KINDS:
            problems.append(f"{label}: unknown stage kind {kind!r}")
            continue
        if kind == "split":
            if spec.get("mode", "array") not in ("array", "object"):
                problems.append(f"{label}: split mode must be array or object")
            if spec.get("mode") == "object":
                declared.add("key")
        elif kind == "evaluate_paths":
            extractions = spec.get("extractions")
            if not isinstance(extractions, Mapping) or not extractions:
                problems.append(f"{label}: needs a non-empty extractions map")
            else:
                declared.update(extractions)
        elif kind == "route":
            found = predicate_problems(spec.get("predicate"), declared)
            problems.extend(f"{label}: {p}" for p in found)
        elif kind == "update_attributes":
            found = update_rule_problems(spec.get("rules"))
            problems.extend(f"{label}: {p}" for p in found)
            if isinstance(spec.get("rules"), list):
                declared.update(
                    r["set"] for r in spec["rules"]
                    if isinstance(r, Mapping) and "set" in r)
        elif kind == "transform":
            found = validate_transform_spec(spec.get("spec"))
            problems.extend(f"{label}: {p}" for p in found)
    return problems


def load_pipeline_config(source: str | Path | Mapping) -> dict:
    """Load and validate; raises PipelineConfigError listing every problem."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = dict(source)
    problems = validate_pipeline_config(doc)
    if problems:
        raise PipelineConfigError(problems)
    return doc


def build_stages(doc: Mapping) -> list[Stage]:
    stages = []
    for i, spec in enumerate(doc["stages"]):
        cls = STAGE_KINDS[spec["kind"]]
        params = {k: v for k, v in spec.items() if k not in ("kind", "name")}
        stages.append(cls(params, name=spec.get("name", f"{spec['kind']}-{i}")))
    return stages
