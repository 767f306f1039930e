"""Dataflow pipelines: records flow through split / extract / route /
rewrite / transform / sanitize stages into the context broker."""

from .builtin import chroma_pipeline_config, positions_pipeline_config
from .config import (
    PipelineConfigError,
    build_stages,
    load_pipeline_config,
    validate_pipeline_config,
)
from .processors import (
    EvaluatePathsStage,
    RouteStage,
    SanitizeStage,
    SplitStage,
    Stage,
    StageFailure,
    TransformStage,
    UpdateAttributesStage,
    evaluate_predicate,
)
from .records import FlowRecord, render_value
from .runner import Pipeline
from .transform import (
    FT_TO_M,
    FTMIN_TO_MS,
    KN_TO_KMH,
    TransformFailure,
    apply_transform,
    resolve_path,
)

__all__ = [
    "chroma_pipeline_config", "positions_pipeline_config",
    "PipelineConfigError", "build_stages", "load_pipeline_config",
    "validate_pipeline_config",
    "EvaluatePathsStage", "RouteStage", "SanitizeStage", "SplitStage",
    "Stage", "StageFailure", "TransformStage", "UpdateAttributesStage",
    "evaluate_predicate",
    "FlowRecord", "render_value", "Pipeline",
    "FT_TO_M", "FTMIN_TO_MS", "KN_TO_KMH", "TransformFailure",
    "apply_transform", "resolve_path",
]
