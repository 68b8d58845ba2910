"""Human-in-the-loop task queue with role gating and accountability rules.

Each kernel ``CreateHilTask`` effect materializes as exactly one task; a
case never has more than one open task because the workflow is strictly
sequential. Decisions are atomic per task: when two submissions race, one
wins and the other observes ``StaleTask``. Review tasks carry the fix
author so a reviewer can never approve their own patch.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import kernel
from .kernel import Stage, StageOutcome


class Role(str, Enum):
    END_USER = kernel.END_USER
    CUSTOMER_SUPPORT = kernel.CUSTOMER_SUPPORT
    PROJECT_MANAGER = kernel.PROJECT_MANAGER
    TEAM_LEAD = kernel.TEAM_LEAD
    DEVELOPER = kernel.DEVELOPER
    REVIEWER = kernel.REVIEWER
    TESTER = kernel.TESTER
    OPS = kernel.OPS


class HilError(Exception):
    pass


class TaskAlreadyOpen(HilError):
    """The case already has an open task; the workflow is sequential."""


class RoleMismatch(HilError):
    pass


class SelfReview(HilError):
    """A reviewer may not approve their own fix."""


class IllegalDecision(HilError):
    pass


class StaleTask(HilError):
    """The task was already decided or superseded."""


class NotYetAssigned(HilError):
    """No responsible human exists before the validity check resolves."""


class UnknownTask(HilError):
    pass


@dataclass(frozen=True, slots=True)
class Actor:
    actor_id: str
    roles: frozenset[Role]

    def __post_init__(self) -> None:
        if not self.roles:
            raise ValueError("an actor needs at least one role")

    def holds(self, role: Role) -> bool:
        return role in self.roles


OPEN = "Open"
DECIDED = "Decided"
SUPERSEDED = "Superseded"


@dataclass(slots=True)
class HilTask:
    task_id: str
    case_id: str
    role: Role
    stage: Stage
    action_set: tuple[str, ...]
    payload: dict = field(default_factory=dict)
    status: str = OPEN
    decided_by: Optional[str] = None
    decision: Optional[str] = None
    source_seq: Optional[int] = None
    created_order: int = 0

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "case_id": self.case_id,
            "role": self.role.value,
            "stage": self.stage.value,
            "action_set": list(self.action_set),
            "payload": self.payload,
            "status": self.status,
            "decided_by": self.decided_by,
            "decision": self.decision,
            "source_seq": self.source_seq,
        }


class TaskBoard:
    """In-memory queue of pending human decisions, one open task per case."""

    def __init__(self) -> None:
        self._tasks: dict[str, HilTask] = {}
        self._by_case: dict[str, list[str]] = {}
        self._order = 0
        self._lock = threading.RLock()

    def create_task(
        self,
        case_id: str,
        role: Role,
        stage: Stage,
        action_set: Sequence[str],
        payload: Optional[dict] = None,
        source_seq: Optional[int] = None,
    ) -> HilTask:
        with self._lock:
            existing = self.open_task(case_id)
            if existing is not None:
                if source_seq is not None and existing.source_seq == source_seq:
                    return existing  # idempotent re-materialization after a crash
                raise TaskAlreadyOpen(f"case {case_id} already has task {existing.task_id}")
            if source_seq is not None:
                for task_id in self._by_case.get(case_id, []):
                    task = self._tasks[task_id]
                    if task.source_seq == source_seq:
                        return task  # effect already materialized and decided
            self._order += 1
            task = HilTask(
                task_id=f"task-{self._order:06d}",
                case_id=case_id,
                role=role,
                stage=stage,
                action_set=tuple(action_set),
                payload=dict(payload or {}),
                source_seq=source_seq,
                created_order=self._order,
            )
            self._tasks[task.task_id] = task
            self._by_case.setdefault(case_id, []).append(task.task_id)
            return task

    def get(self, task_id: str) -> HilTask:
        task = self._tasks.get(task_id)
        if task is None:
            raise UnknownTask(task_id)
        return task

    def open_task(self, case_id: str) -> Optional[HilTask]:
        for task_id in self._by_case.get(case_id, []):
            task = self._tasks[task_id]
            if task.status == OPEN:
                return task
        return None

    def list_tasks(self, role: Role, actor: Optional[Actor] = None) -> list[HilTask]:
        """Open tasks for a role, oldest first."""
        tasks = [
            t for t in self._tasks.values() if t.status == OPEN and t.role is role
        ]
        if actor is not None and not actor.holds(role):
            return []
        return sorted(tasks, key=lambda t: t.created_order)

    def submit_decision(
        self, task_id: str, actor: Actor, decision: str, payload: Optional[dict] = None
    ) -> StageOutcome:
        """Decide an open task; returns the outcome to feed the kernel."""
        with self._lock:
            task = self.get(task_id)
            if task.status != OPEN:
                raise StaleTask(f"task {task_id} is {task.status}")
            if not actor.holds(task.role):
                raise RoleMismatch(
                    f"{actor.actor_id} lacks role {task.role.value} for task {task_id}"
                )
            if decision not in task.action_set:
                raise IllegalDecision(
                    f"{decision!r} not in action set {task.action_set} of task {task_id}"
                )
            fix_author = task.payload.get("fix_author")
            if task.stage is Stage.REVIEWER_REVIEW and fix_author == actor.actor_id:
                raise SelfReview(
                    f"{actor.actor_id} authored the fix under review"
                )
            task.status = DECIDED
            task.decided_by = actor.actor_id
            task.decision = decision
            merged = dict(payload or {})
            merged.setdefault("decided_by", actor.actor_id)
            return StageOutcome(decision, merged)


def responsible_human(case: kernel.BugCase) -> str:
    """The accountable person: the CS rep on the invalid route, the
    assigned developer on the valid route."""
    if not case.responsible_human:
        raise NotYetAssigned(
            f"case {case.case_id} at {case.stage.value} has no responsible human yet"
        )
    _, _, actor_id = case.responsible_human.partition(":")
    return actor_id or case.responsible_human
