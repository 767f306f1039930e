"""Turnaround task plans: dependency-aware status management.

Task state lives in FlightNotification records; completing a task is only
legal once every dependency is completed, and status moves follow the
notification transition table.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Optional

from ..model import (
    FlightNotificationRecord,
    notification_transition_allowed,
    split_entity_id,
)


class TaskError(ValueError):
    def __init__(self, message: str, blocking_task: Optional[str] = None):
        super().__init__(message)
        self.blocking_task = blocking_task


@dataclass(frozen=True)
class TaskSpec:
    name: str
    depends_on: tuple[str, ...] = ()


# Deboard, then clean, then board; fueling and catering run alongside;
# pushback needs the cabin closed and the ground services done.
DEFAULT_TASK_TEMPLATE: tuple[TaskSpec, ...] = (
    TaskSpec("deboarding"),
    TaskSpec("cleaning", ("deboarding",)),
    TaskSpec("fueling"),
    TaskSpec("catering"),
    TaskSpec("boarding", ("cleaning",)),
    TaskSpec("pushback", ("boarding", "fueling", "catering")),
)


@dataclass
class Task:
    record: FlightNotificationRecord
    depends_on: tuple[str, ...]  # task names within the same plan

    @property
    def name(self) -> str:
        return self.record.description or ""

    @property
    def status(self) -> str:
        return self.record.status or "unknown"


@dataclass
class TaskPlan:
    flight_id: str
    tasks: dict[str, Task] = field(default_factory=dict)  # keyed by task name

    def task_ids(self) -> list[str]:
        return [t.record.entity_id for t in self.tasks.values()]

    def find(self, task_ref: str) -> Task:
        """Accept a task name, a notification key, or a full entity id."""
        if task_ref in self.tasks:
            return self.tasks[task_ref]
        for task in self.tasks.values():
            if task_ref in (task.record.key, task.record.entity_id):
                return task
        raise TaskError(f"no task {task_ref!r} for {self.flight_id}")

    def to_document(self) -> dict:
        return {
            "flight": self.flight_id,
            "tasks": [
                {
                    "id": task.record.entity_id,
                    "name": name,
                    "status": task.status,
                    "dependsOn": list(task.depends_on),
                    "issuer": task.record.issuer,
                    "dateIssued": _wire_or_none(task.record.dateIssued),
                    "dateModified": _wire_or_none(task.record.dateModified),
                }
                for name, task in self.tasks.items()
            ],
        }


def _wire_or_none(at: Optional[_dt.datetime]) -> Optional[str]:
    from ..model import timefmt
    return timefmt.format_wire(at) if at else None


def _template_problems(template: tuple[TaskSpec, ...]) -> list[str]:
    names = [spec.name for spec in template]
    problems = []
    if len(set(names)) != len(names):
        problems.append("duplicate task names")
    known: set[str] = set()
    for spec in template:
        for dep in spec.depends_on:
            if dep not in known:
                problems.append(
                    f"task {spec.name!r} depends on {dep!r} which is not "
                    f"defined before it")
        known.add(spec.name)
    return problems  # ordering requirement doubles as a cycle check


def build_plan(flight_id: str, issued_at: _dt.datetime,
               template: tuple[TaskSpec, ...] = DEFAULT_TASK_TEMPLATE,
               issuer: str = "turnaround-engine") -> TaskPlan:
    problems = _template_problems(template)
    if problems:
        raise TaskError("; ".join(problems))
    _, flight_key = split_entity_id(flight_id)
    plan = TaskPlan(flight_id=flight_id)
    for spec in template:
        record = FlightNotificationRecord(
            key=f"{flight_key}-{spec.name}",
            description=spec.name,
            dateIssued=issued_at,
            dateModified=issued_at,
            issuer=issuer,
            status="inactive",
            refFlight=flight_id)
        plan.tasks[spec.name] = Task(record=record,
                                     depends_on=spec.depends_on)
    return plan


def manage_task(plan: TaskPlan, task_ref: str, new_status: str,
                at: _dt.datetime) -> tuple[Task, bool]:
    """Move a task to new_status; returns (task, whether anything changed).

    Completion requires every dependency completed; the error names the
    first blocking task. Illegal transitions are refused outright.
    """
    task = plan.find(task_ref)
    current = task.status
    if new_status == current:
        return task, False
    if not notification_transition_allowed(current, new_status):
        raise TaskError(
            f"task {task.name!r} cannot go {current} -> {new_status}")
    if new_status == "completed":
        for dep_name in task.depends_on:
            dep = plan.tasks[dep_name]
            if dep.status != "completed":
                raise TaskError(
                    f"cannot complete {task.name!r}: dependency "
                    f"{dep_name!r} is {dep.status}",
                    blocking_task=dep_name)
    task.record.status = new_status
    task.record.dateModified = at
    return task, True
