"""Event-sourced bug-tracking lifecycle engine with agent orchestration,
human-in-the-loop checkpoints, and a discrete-event workflow simulator."""

from .kernel import (
    BugCase,
    Resolution,
    Stage,
    StageOutcome,
    Thresholds,
    Workflow,
    happy_path,
    init_case,
    is_terminal,
    legal_outcomes,
    step,
)
from .service import BugTracker, ServiceConfig, Session

__version__ = "0.1.0"

__all__ = [
    "BugCase",
    "BugTracker",
    "Resolution",
    "ServiceConfig",
    "Session",
    "Stage",
    "StageOutcome",
    "Thresholds",
    "Workflow",
    "happy_path",
    "init_case",
    "is_terminal",
    "legal_outcomes",
    "step",
    "__version__",
]
