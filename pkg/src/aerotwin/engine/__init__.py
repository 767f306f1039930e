"""Turnaround engine: A-CDM milestones, derived times, tasks, delay colour."""
from .acdm import (
    ACTUALS,
    DEFAULT_DELAY_THRESHOLD_S,
    MILESTONE_FIELDS,
    DelayStatus,
    MilestoneError,
    TurnaroundLink,
    apply_milestone,
    classify_delay,
    compute_block_times,
    compute_taxi_times,
    derived_times,
    link_turnaround,
)
from .service import WATCHED_FLIGHT_ATTRIBUTES, EngineError, EngineService
from .tasks import (
    DEFAULT_TASK_TEMPLATE,
    Task,
    TaskError,
    TaskPlan,
    TaskSpec,
    build_plan,
    manage_task,
)

__all__ = [
    "ACTUALS",
    "DEFAULT_DELAY_THRESHOLD_S",
    "DEFAULT_TASK_TEMPLATE",
    "MILESTONE_FIELDS",
    "WATCHED_FLIGHT_ATTRIBUTES",
    "DelayStatus",
    "EngineError",
    "EngineService",
    "MilestoneError",
    "Task",
    "TaskError",
    "TaskPlan",
    "TaskSpec",
    "TurnaroundLink",
    "apply_milestone",
    "build_plan",
    "classify_delay",
    "compute_block_times",
    "compute_taxi_times",
    "derived_times",
    "link_turnaround",
    "manage_task",
]
