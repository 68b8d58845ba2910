"""Deterministic lifecycle state machines for bug-tracking workflows.

Two transition tables are defined over one stage vocabulary:

* ``Workflow.PROPOSED`` — the agent-assisted lifecycle: chatbot intake,
  report enhancement, automated reproduction / classification / tracing /
  validity checking, assignment recommendation, patch generation and
  verification, with bounded agent loops that escalate to humans when an
  iteration counter reaches its threshold.
* ``Workflow.TRADITIONAL`` — the fully manual baseline: customer support
  reproduces and classifies, the project manager decides and assigns, the
  developer fixes, a reviewer and a tester gate the fix, ops deploys.

``step`` is a pure function: it never mutates its input and always returns
a fresh :class:`BugCase` plus the ordered list of effects the caller must
carry out (invoke an agent, open a human task, notify the user, record an
artifact, close the case). All engine state therefore lives in the event
log, and replaying a log reproduces the live case exactly.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


class Stage(str, Enum):
    """Lifecycle stages shared by both workflow tables."""

    REPORT_DIALOGUE = "ReportDialogue"
    ENHANCEMENT = "Enhancement"
    AGENT_REPRODUCTION = "AgentReproduction"
    MANUAL_REPRODUCTION = "ManualReproduction"
    CLASSIFICATION = "Classification"
    FEATURE_TRACING = "FeatureTracing"
    VALIDITY_CHECK = "ValidityCheck"
    NO_CODE_FIX = "NoCodeFix"
    NO_CODE_VERIFICATION = "NoCodeVerification"
    MANUAL_NO_CODE_FIX = "ManualNoCodeFix"
    FIX_DECISION = "FixDecision"
    ASSIGNMENT_RECOMMENDATION = "AssignmentRecommendation"
    ASSIGNMENT_REVIEW = "AssignmentReview"
    LOCALIZATION = "Localization"
    PATCH_GENERATION = "PatchGeneration"
    DEVELOPER_REVIEW = "DeveloperReview"
    MANUAL_FIX = "ManualFix"
    REVIEWER_REVIEW = "ReviewerReview"
    AGENT_VERIFICATION = "AgentVerification"
    MANUAL_TESTER_VERIFICATION = "ManualTesterVerification"
    DEPLOYMENT = "Deployment"
    USER_VERIFICATION = "UserVerification"
    CLOSED = "Closed"


class Resolution(str, Enum):
    RESOLVED = "Resolved"
    WONT_FIX = "WontFix"
    INVALID_RESOLVED = "InvalidResolved"
    IRREPRODUCIBLE = "Irreproducible"


class FixOrigin(str, Enum):
    NONE = "None"
    AGENT_PATCH = "AgentPatch"
    MANUAL_PATCH = "ManualPatch"


class Workflow(str, Enum):
    PROPOSED = "proposed"
    TRADITIONAL = "traditional"


# Agent kind names (values mirrored by agents.AgentKind).
CHATBOT_INTAKE = "chatbot_intake"
ENHANCER = "enhancer"
REPRODUCER = "reproducer"
CLASSIFIER = "classifier"
FEATURE_TRACER = "feature_tracer"
VALIDITY_CHECKER = "validity_checker"
ASSIGNER = "assigner"
NOCODE_FIXER = "nocode_fixer"
LOCALIZER = "localizer"
PATCH_GENERATOR = "patch_generator"
VERIFIER = "verifier"
DEPLOYMENT_ASSISTANT = "deployment_assistant"

# Role names (values mirrored by hil.Role).
END_USER = "end_user"
CUSTOMER_SUPPORT = "customer_support"
PROJECT_MANAGER = "project_manager"
TEAM_LEAD = "team_lead"
DEVELOPER = "developer"
REVIEWER = "reviewer"
TESTER = "tester"
OPS = "ops"

# Fallback staffing used when an outcome payload does not name the actor.
# The service layer keeps these in sync with its configured staffing.
DEFAULT_CS_REPRESENTATIVE = "cs-1"
DEFAULT_PROJECT_MANAGER = "pm-1"
DEFAULT_DEVELOPER = "dev-1"


class KernelError(Exception):
    """Base class for lifecycle-kernel errors."""


class ZeroThreshold(KernelError):
    """An iteration threshold below 1 was supplied."""


class IllegalOutcome(KernelError):
    """The outcome kind is not legal for the case's current stage."""


class TerminalCase(KernelError):
    """A closed case cannot be stepped."""


@dataclass(frozen=True, slots=True)
class Thresholds:
    """Escalation thresholds for the four bounded agent loops."""

    repro: int = 3
    nocode: int = 3
    patch_cycle: int = 3
    agent_verify: int = 3

    def __post_init__(self) -> None:
        for name in ("repro", "nocode", "patch_cycle", "agent_verify"):
            if getattr(self, name) < 1:
                raise ZeroThreshold(f"threshold {name} must be >= 1")

    def as_dict(self) -> dict[str, int]:
        return {
            "repro": self.repro,
            "nocode": self.nocode,
            "patch_cycle": self.patch_cycle,
            "agent_verify": self.agent_verify,
        }

    @classmethod
    def from_dict(cls, data: dict[str, int]) -> "Thresholds":
        return cls(**{k: int(v) for k, v in data.items()})


@dataclass(frozen=True, slots=True)
class BugCase:
    """Live state of one bug: current stage plus loop bookkeeping."""

    case_id: str
    report_ref: str
    stage: Stage
    resolution: Optional[Resolution]
    repro_count: int
    nocode_verify_count: int
    patch_cycle_count: int
    agent_verify_count: int
    fix_origin: FixOrigin
    responsible_human: Optional[str]
    restart_count: int
    thresholds: Thresholds

    def counters(self) -> dict[str, int]:
        return {
            "repro": self.repro_count,
            "nocode_verify": self.nocode_verify_count,
            "patch_cycle": self.patch_cycle_count,
            "agent_verify": self.agent_verify_count,
        }

    def stage_label(self) -> str:
        if self.stage is Stage.CLOSED and self.resolution is not None:
            return f"Closed({self.resolution.value})"
        return self.stage.value


@dataclass(frozen=True, slots=True)
class StageOutcome:
    """Result of acting at a stage: an outcome tag plus free-form detail."""

    kind: str
    payload: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Effects


@dataclass(frozen=True, slots=True)
class InvokeAgent:
    agent_kind: str


@dataclass(frozen=True, slots=True)
class CreateHilTask:
    role: str
    action_set: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class NotifyUser:
    message_kind: str


@dataclass(frozen=True, slots=True)
class RecordArtifact:
    kind: str


@dataclass(frozen=True, slots=True)
class Close:
    resolution: Resolution


Effect = Union[InvokeAgent, CreateHilTask, NotifyUser, RecordArtifact, Close]


def effect_to_dict(effect: Effect) -> dict:
    if isinstance(effect, InvokeAgent):
        return {"effect": "InvokeAgent", "agent_kind": effect.agent_kind}
    if isinstance(effect, CreateHilTask):
        return {
            "effect": "CreateHilTask",
            "role": effect.role,
            "action_set": list(effect.action_set),
        }
    if isinstance(effect, NotifyUser):
        return {"effect": "NotifyUser", "message_kind": effect.message_kind}
    if isinstance(effect, RecordArtifact):
        return {"effect": "RecordArtifact", "kind": effect.kind}
    if isinstance(effect, Close):
        return {"effect": "Close", "resolution": effect.resolution.value}
    raise TypeError(f"unknown effect {effect!r}")


def effect_from_dict(data: dict) -> Effect:
    tag = data["effect"]
    if tag == "InvokeAgent":
        return InvokeAgent(data["agent_kind"])
    if tag == "CreateHilTask":
        return CreateHilTask(data["role"], tuple(data["action_set"]))
    if tag == "NotifyUser":
        return NotifyUser(data["message_kind"])
    if tag == "RecordArtifact":
        return RecordArtifact(data["kind"])
    if tag == "Close":
        return Close(Resolution(data["resolution"]))
    raise ValueError(f"unknown effect tag {tag!r}")


# ---------------------------------------------------------------------------
# Transition rules

_COUNTER_THRESHOLD = {
    "repro_count": "repro",
    "nocode_verify_count": "nocode",
    "patch_cycle_count": "patch_cycle",
    "agent_verify_count": "agent_verify",
}


def _saturated_next(value: int, limit: int) -> int:
    return value + 1 if value < limit else value


@dataclass(frozen=True)
class Guard:
    """Predicate over the pre-transition case.

    Counter guards compare the saturating post-increment value against the
    counter's threshold, so escalation fires on the failing attempt that
    brings the counter to its threshold; the counter never exceeds it.
    """

    counter: Optional[str] = None
    reaches_threshold: Optional[bool] = None
    fix_origin: Optional[FixOrigin] = None

    def admits(self, case: BugCase) -> bool:
        if self.counter is not None:
            limit = getattr(case.thresholds, _COUNTER_THRESHOLD[self.counter])
            reached = _saturated_next(getattr(case, self.counter), limit) >= limit
            if reached != self.reaches_threshold:
                return False
        if self.fix_origin is not None:
            origin = case.fix_origin
            # fix_origin is never NONE at verification stages on any
            # reachable path; map it to the agent route defensively.
            if origin is FixOrigin.NONE:
                origin = FixOrigin.AGENT_PATCH
            if origin is not self.fix_origin:
                return False
        return True


@dataclass(frozen=True)
class Rule:
    """One row of a transition table."""

    stage: Stage
    outcome: str
    target: Stage
    guard: Guard = Guard()
    effects: tuple = ()
    increments: Optional[str] = None
    sets_origin: Optional[FixOrigin] = None
    restarts: bool = False
    assigns: Optional[str] = None  # "cs" | "pm" | "developer" | None
    close: Optional[str] = None  # Resolution value | "by_origin" | None
    escalates: bool = False

    def apply(self, case: BugCase, outcome: StageOutcome) -> tuple[BugCase, list[Effect]]:
        counters = {
            "repro_count": case.repro_count,
            "nocode_verify_count": case.nocode_verify_count,
            "patch_cycle_count": case.patch_cycle_count,
            "agent_verify_count": case.agent_verify_count,
        }
        if self.increments is not None:
            limit = getattr(case.thresholds, _COUNTER_THRESHOLD[self.increments])
            counters[self.increments] = _saturated_next(counters[self.increments], limit)
        fix_origin = case.fix_origin
        restart_count = case.restart_count
        if self.sets_origin is not None:
            fix_origin = self.sets_origin
        if self.restarts:
            counters = dict.fromkeys(counters, 0)
            fix_origin = FixOrigin.NONE
            restart_count += 1
        responsible = case.responsible_human
        if self.assigns == "cs":
            rep = outcome.payload.get("assignee", DEFAULT_CS_REPRESENTATIVE)
            responsible = f"{CUSTOMER_SUPPORT}:{rep}"
        elif self.assigns == "pm":
            rep = outcome.payload.get("assignee", DEFAULT_PROJECT_MANAGER)
            responsible = f"{PROJECT_MANAGER}:{rep}"
        elif self.assigns == "developer":
            dev = outcome.payload.get("developer", DEFAULT_DEVELOPER)
            responsible = f"{DEVELOPER}:{dev}"

        resolution: Optional[Resolution] = None
        if self.close == "by_origin":
            resolution = (
                Resolution.RESOLVED
                if case.fix_origin in (FixOrigin.AGENT_PATCH, FixOrigin.MANUAL_PATCH)
                else Resolution.INVALID_RESOLVED
            )
        elif self.close is not None:
            resolution = Resolution(self.close)

        if self.close is None:
            effects = list(self.effects)
        else:
            effects = [
                Close(resolution) if template == "close" else template
                for template in self.effects
            ]
        next_case = BugCase(
            case_id=case.case_id,
            report_ref=case.report_ref,
            stage=self.target,
            resolution=resolution,
            repro_count=counters["repro_count"],
            nocode_verify_count=counters["nocode_verify_count"],
            patch_cycle_count=counters["patch_cycle_count"],
            agent_verify_count=counters["agent_verify_count"],
            fix_origin=fix_origin,
            responsible_human=responsible,
            restart_count=restart_count,
            thresholds=case.thresholds,
        )
        return next_case, effects


def _hil(role: str) -> CreateHilTask:
    # Placeholder action set; filled from the target stage at apply time.
    return CreateHilTask(role, ())


# Outcome kinds.
NEEDS_MORE_INFO = "NeedsMoreInfo"
SUFFICIENT = "Sufficient"
SUBMITTED_REPORT = "Submitted"
ENHANCED = "Enhanced"
SUCCESS = "Success"
FAIL = "Fail"
CANNOT_REPRODUCE = "CannotReproduce"
NEEDS_DETAILS = "NeedsDetails"
DONE = "Done"
VALID = "Valid"
INVALID = "Invalid"
PROPOSED_FIX = "Proposed"
PASS = "Pass"
WONT_FIX = "WontFix"
FIX = "Fix"
RECOMMENDED = "Recommended"
APPROVE = "Approve"
OVERRIDE = "Override"
REJECT = "Reject"
ASSIGN = "Assign"
GENERATED = "Generated"
MERGE = "Merge"
SUBMITTED = "Submitted"
PROVIDED = "Provided"
DEPLOYED = "Deployed"
ACCEPT = "Accept"


_S = Stage

PROPOSED_RULES: tuple[Rule, ...] = (
    # Intake dialogue loops until the report is sufficiently detailed.
    Rule(_S.REPORT_DIALOGUE, NEEDS_MORE_INFO, _S.REPORT_DIALOGUE,
         effects=(NotifyUser("follow_up_question"),)),
    Rule(_S.REPORT_DIALOGUE, SUFFICIENT, _S.ENHANCEMENT,
         effects=(InvokeAgent(ENHANCER),)),
    Rule(_S.ENHANCEMENT, ENHANCED, _S.AGENT_REPRODUCTION,
         effects=(InvokeAgent(REPRODUCER),)),
    Rule(_S.AGENT_REPRODUCTION, SUCCESS, _S.CLASSIFICATION,
         effects=(InvokeAgent(CLASSIFIER),)),
    # Failed reproduction loops back through enhancement until the
    # threshold is reached, then escalates to customer support.
    Rule(_S.AGENT_REPRODUCTION, FAIL, _S.ENHANCEMENT,
         guard=Guard(counter="repro_count", reaches_threshold=False),
         increments="repro_count",
         effects=(InvokeAgent(ENHANCER),)),
    Rule(_S.AGENT_REPRODUCTION, FAIL, _S.MANUAL_REPRODUCTION,
         guard=Guard(counter="repro_count", reaches_threshold=True),
         increments="repro_count", escalates=True,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.MANUAL_REPRODUCTION, SUCCESS, _S.CLASSIFICATION,
         effects=(RecordArtifact("ReproductionArtifact"), InvokeAgent(CLASSIFIER))),
    Rule(_S.MANUAL_REPRODUCTION, CANNOT_REPRODUCE, _S.CLOSED,
         close=Resolution.IRREPRODUCIBLE.value,
         effects=(NotifyUser("irreproducible"), "close")),
    Rule(_S.CLASSIFICATION, DONE, _S.FEATURE_TRACING,
         effects=(InvokeAgent(FEATURE_TRACER),)),
    Rule(_S.FEATURE_TRACING, DONE, _S.VALIDITY_CHECK,
         effects=(InvokeAgent(VALIDITY_CHECKER),)),
    # Invalid bugs go to the no-code route under customer-support
    # accountability; valid bugs go to the project manager.
    Rule(_S.VALIDITY_CHECK, INVALID, _S.NO_CODE_FIX,
         assigns="cs",
         effects=(InvokeAgent(NOCODE_FIXER),)),
    Rule(_S.VALIDITY_CHECK, VALID, _S.FIX_DECISION,
         assigns="pm",
         effects=(_hil(PROJECT_MANAGER),)),
    Rule(_S.NO_CODE_FIX, PROPOSED_FIX, _S.NO_CODE_VERIFICATION,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.NO_CODE_VERIFICATION, PASS, _S.USER_VERIFICATION,
         effects=(NotifyUser("verify_resolution"), _hil(END_USER))),
    Rule(_S.NO_CODE_VERIFICATION, FAIL, _S.NO_CODE_FIX,
         guard=Guard(counter="nocode_verify_count", reaches_threshold=False),
         increments="nocode_verify_count",
         effects=(InvokeAgent(NOCODE_FIXER),)),
    Rule(_S.NO_CODE_VERIFICATION, FAIL, _S.MANUAL_NO_CODE_FIX,
         guard=Guard(counter="nocode_verify_count", reaches_threshold=True),
         increments="nocode_verify_count", escalates=True,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.MANUAL_NO_CODE_FIX, PROVIDED, _S.USER_VERIFICATION,
         effects=(RecordArtifact("NoCodeFixProposal"),
                  NotifyUser("verify_resolution"), _hil(END_USER))),
    Rule(_S.FIX_DECISION, WONT_FIX, _S.CLOSED,
         close=Resolution.WONT_FIX.value,
         effects=(NotifyUser("wont_fix"), "close")),
    Rule(_S.FIX_DECISION, FIX, _S.ASSIGNMENT_RECOMMENDATION,
         effects=(InvokeAgent(ASSIGNER),)),
    Rule(_S.ASSIGNMENT_RECOMMENDATION, RECOMMENDED, _S.ASSIGNMENT_REVIEW,
         effects=(_hil(TEAM_LEAD),)),
    Rule(_S.ASSIGNMENT_REVIEW, APPROVE, _S.LOCALIZATION,
         assigns="developer",
         effects=(InvokeAgent(LOCALIZER),)),
    Rule(_S.ASSIGNMENT_REVIEW, OVERRIDE, _S.LOCALIZATION,
         assigns="developer",
         effects=(InvokeAgent(LOCALIZER),)),
    Rule(_S.ASSIGNMENT_REVIEW, REJECT, _S.ASSIGNMENT_RECOMMENDATION,
         effects=(InvokeAgent(ASSIGNER),)),
    Rule(_S.LOCALIZATION, DONE, _S.PATCH_GENERATION,
         effects=(InvokeAgent(PATCH_GENERATOR),)),
    Rule(_S.PATCH_GENERATION, GENERATED, _S.DEVELOPER_REVIEW,
         sets_origin=FixOrigin.AGENT_PATCH,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.DEVELOPER_REVIEW, MERGE, _S.AGENT_VERIFICATION,
         effects=(InvokeAgent(VERIFIER),)),
    Rule(_S.DEVELOPER_REVIEW, REJECT, _S.LOCALIZATION,
         guard=Guard(counter="patch_cycle_count", reaches_threshold=False),
         increments="patch_cycle_count",
         effects=(InvokeAgent(LOCALIZER),)),
    Rule(_S.DEVELOPER_REVIEW, REJECT, _S.MANUAL_FIX,
         guard=Guard(counter="patch_cycle_count", reaches_threshold=True),
         increments="patch_cycle_count", escalates=True,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.MANUAL_FIX, SUBMITTED, _S.REVIEWER_REVIEW,
         sets_origin=FixOrigin.MANUAL_PATCH,
         effects=(RecordArtifact("PatchCandidate"), _hil(REVIEWER))),
    Rule(_S.REVIEWER_REVIEW, REJECT, _S.MANUAL_FIX,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.REVIEWER_REVIEW, APPROVE, _S.AGENT_VERIFICATION,
         effects=(InvokeAgent(VERIFIER),)),
    Rule(_S.AGENT_VERIFICATION, PASS, _S.DEPLOYMENT,
         effects=(InvokeAgent(DEPLOYMENT_ASSISTANT),)),
    # Verification failures route by the origin of the fix under review:
    # agent patches are regenerated, manual patches return to the developer;
    # at the threshold the agent route hands the fix to the developer and
    # the manual route delegates verification to the tester.
    Rule(_S.AGENT_VERIFICATION, FAIL, _S.LOCALIZATION,
         guard=Guard(counter="agent_verify_count", reaches_threshold=False,
                     fix_origin=FixOrigin.AGENT_PATCH),
         increments="agent_verify_count",
         effects=(InvokeAgent(LOCALIZER),)),
    Rule(_S.AGENT_VERIFICATION, FAIL, _S.MANUAL_FIX,
         guard=Guard(counter="agent_verify_count", reaches_threshold=False,
                     fix_origin=FixOrigin.MANUAL_PATCH),
         increments="agent_verify_count",
         effects=(_hil(DEVELOPER),)),
    Rule(_S.AGENT_VERIFICATION, FAIL, _S.MANUAL_FIX,
         guard=Guard(counter="agent_verify_count", reaches_threshold=True,
                     fix_origin=FixOrigin.AGENT_PATCH),
         increments="agent_verify_count", escalates=True,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.AGENT_VERIFICATION, FAIL, _S.MANUAL_TESTER_VERIFICATION,
         guard=Guard(counter="agent_verify_count", reaches_threshold=True,
                     fix_origin=FixOrigin.MANUAL_PATCH),
         increments="agent_verify_count", escalates=True,
         effects=(_hil(TESTER),)),
    Rule(_S.MANUAL_TESTER_VERIFICATION, PASS, _S.DEPLOYMENT,
         effects=(InvokeAgent(DEPLOYMENT_ASSISTANT),)),
    Rule(_S.MANUAL_TESTER_VERIFICATION, FAIL, _S.MANUAL_FIX,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.DEPLOYMENT, DEPLOYED, _S.USER_VERIFICATION,
         effects=(NotifyUser("verify_fix"), _hil(END_USER))),
    Rule(_S.USER_VERIFICATION, ACCEPT, _S.CLOSED,
         close="by_origin",
         effects=("close",)),
    Rule(_S.USER_VERIFICATION, REJECT, _S.REPORT_DIALOGUE,
         restarts=True,
         effects=(InvokeAgent(CHATBOT_INTAKE),)),
)


TRADITIONAL_RULES: tuple[Rule, ...] = (
    Rule(_S.REPORT_DIALOGUE, SUBMITTED_REPORT, _S.MANUAL_REPRODUCTION,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.MANUAL_REPRODUCTION, SUCCESS, _S.CLASSIFICATION,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    # Unreproducible reports bounce back to the reporter for more detail.
    Rule(_S.MANUAL_REPRODUCTION, NEEDS_DETAILS, _S.REPORT_DIALOGUE,
         effects=(NotifyUser("request_details"), _hil(END_USER))),
    Rule(_S.CLASSIFICATION, DONE, _S.FEATURE_TRACING,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.FEATURE_TRACING, DONE, _S.VALIDITY_CHECK,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.VALIDITY_CHECK, INVALID, _S.NO_CODE_FIX,
         assigns="cs",
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.VALIDITY_CHECK, VALID, _S.FIX_DECISION,
         assigns="pm",
         effects=(_hil(PROJECT_MANAGER),)),
    Rule(_S.NO_CODE_FIX, PROPOSED_FIX, _S.NO_CODE_VERIFICATION,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.NO_CODE_VERIFICATION, PASS, _S.USER_VERIFICATION,
         effects=(NotifyUser("verify_resolution"), _hil(END_USER))),
    # The manual no-code loop has no escalation threshold.
    Rule(_S.NO_CODE_VERIFICATION, FAIL, _S.NO_CODE_FIX,
         effects=(_hil(CUSTOMER_SUPPORT),)),
    Rule(_S.FIX_DECISION, WONT_FIX, _S.CLOSED,
         close=Resolution.WONT_FIX.value,
         effects=(NotifyUser("wont_fix"), "close")),
    Rule(_S.FIX_DECISION, FIX, _S.ASSIGNMENT_REVIEW,
         effects=(_hil(TEAM_LEAD),)),
    Rule(_S.ASSIGNMENT_REVIEW, ASSIGN, _S.LOCALIZATION,
         assigns="developer",
         effects=(_hil(DEVELOPER),)),
    Rule(_S.LOCALIZATION, DONE, _S.MANUAL_FIX,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.MANUAL_FIX, SUBMITTED, _S.REVIEWER_REVIEW,
         sets_origin=FixOrigin.MANUAL_PATCH,
         effects=(RecordArtifact("PatchCandidate"), _hil(REVIEWER))),
    Rule(_S.REVIEWER_REVIEW, APPROVE, _S.MANUAL_TESTER_VERIFICATION,
         effects=(_hil(TESTER),)),
    Rule(_S.REVIEWER_REVIEW, REJECT, _S.MANUAL_FIX,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.MANUAL_TESTER_VERIFICATION, PASS, _S.DEPLOYMENT,
         effects=(_hil(OPS),)),
    Rule(_S.MANUAL_TESTER_VERIFICATION, FAIL, _S.MANUAL_FIX,
         effects=(_hil(DEVELOPER),)),
    Rule(_S.DEPLOYMENT, DEPLOYED, _S.USER_VERIFICATION,
         effects=(NotifyUser("verify_fix"), _hil(END_USER))),
    Rule(_S.USER_VERIFICATION, ACCEPT, _S.CLOSED,
         close="by_origin",
         effects=("close",)),
    Rule(_S.USER_VERIFICATION, REJECT, _S.REPORT_DIALOGUE,
         restarts=True,
         effects=(_hil(END_USER),)),
)

_TABLES: dict[Workflow, tuple[Rule, ...]] = {
    Workflow.PROPOSED: PROPOSED_RULES,
    Workflow.TRADITIONAL: TRADITIONAL_RULES,
}

_RULES_BY_KEY: dict[Workflow, dict[tuple[Stage, str], list[Rule]]] = {}
for _wf, _rules in _TABLES.items():
    index: dict[tuple[Stage, str], list[Rule]] = {}
    for _rule in _rules:
        index.setdefault((_rule.stage, _rule.outcome), []).append(_rule)
    _RULES_BY_KEY[_wf] = index

# Fill each CreateHilTask template's action set from the target stage's
# outcomes in its own table (the tables must be indexed first).
for _wf, _rules in _TABLES.items():
    for _rule in _rules:
        completed = tuple(
            CreateHilTask(
                template.role,
                tuple(sorted(
                    kind for (s, kind) in _RULES_BY_KEY[_wf] if s is _rule.target
                )),
            )
            if isinstance(template, CreateHilTask) and not template.action_set
            else template
            for template in _rule.effects
        )
        object.__setattr__(_rule, "effects", completed)


def rules(workflow: Workflow = Workflow.PROPOSED) -> tuple[Rule, ...]:
    return _TABLES[workflow]


def legal_outcomes(stage: Stage, workflow: Workflow = Workflow.PROPOSED) -> frozenset[str]:
    """Outcome kinds with at least one transition row at this stage."""
    if stage is Stage.CLOSED:
        return frozenset()
    return frozenset(
        kind for (s, kind) in _RULES_BY_KEY[workflow] if s is stage
    )


def stages(workflow: Workflow = Workflow.PROPOSED) -> frozenset[Stage]:
    """Stages covered by the workflow's table (plus the terminal stage)."""
    covered = {rule.stage for rule in _TABLES[workflow]}
    covered.add(Stage.CLOSED)
    return frozenset(covered)


def is_terminal(stage: Stage) -> bool:
    return stage is Stage.CLOSED


def init_case(
    report_ref: str,
    thresholds: Thresholds,
    case_id: Optional[str] = None,
) -> BugCase:
    """Open a case at the report dialogue with zeroed counters."""
    if not isinstance(thresholds, Thresholds):
        thresholds = Thresholds.from_dict(dict(thresholds))
    return BugCase(
        case_id=case_id or f"case-{uuid.uuid4().hex[:12]}",
        report_ref=report_ref,
        stage=Stage.REPORT_DIALOGUE,
        resolution=None,
        repro_count=0,
        nocode_verify_count=0,
        patch_cycle_count=0,
        agent_verify_count=0,
        fix_origin=FixOrigin.NONE,
        responsible_human=None,
        restart_count=0,
        thresholds=thresholds,
    )


def select_rule(
    case: BugCase, outcome: StageOutcome, workflow: Workflow = Workflow.PROPOSED
) -> Rule:
    """The unique rule admitted by (stage, outcome kind, guards)."""
    if is_terminal(case.stage):
        raise TerminalCase(f"case {case.case_id} is closed")
    candidates = _RULES_BY_KEY[workflow].get((case.stage, outcome.kind))
    if not candidates:
        raise IllegalOutcome(
            f"outcome {outcome.kind!r} is not legal at stage {case.stage.value}"
        )
    admitted = [rule for rule in candidates if rule.guard.admits(case)]
    if len(admitted) != 1:
        raise KernelError(
            f"{len(admitted)} rules admitted for {case.stage.value}/{outcome.kind}"
        )
    return admitted[0]


def step(
    case: BugCase, outcome: StageOutcome, workflow: Workflow = Workflow.PROPOSED
) -> tuple[BugCase, list[Effect]]:
    """Advance a case by one outcome; pure, total over legal inputs."""
    rule = select_rule(case, outcome, workflow)
    return rule.apply(case, outcome)


# Outcome preferred at each stage when everything succeeds first try.
_PREFERRED: dict[Workflow, dict[Stage, str]] = {
    Workflow.PROPOSED: {
        _S.REPORT_DIALOGUE: SUFFICIENT,
        _S.ENHANCEMENT: ENHANCED,
        _S.AGENT_REPRODUCTION: SUCCESS,
        _S.MANUAL_REPRODUCTION: SUCCESS,
        _S.CLASSIFICATION: DONE,
        _S.FEATURE_TRACING: DONE,
        _S.VALIDITY_CHECK: VALID,
        _S.NO_CODE_FIX: PROPOSED_FIX,
        _S.NO_CODE_VERIFICATION: PASS,
        _S.MANUAL_NO_CODE_FIX: PROVIDED,
        _S.FIX_DECISION: FIX,
        _S.ASSIGNMENT_RECOMMENDATION: RECOMMENDED,
        _S.ASSIGNMENT_REVIEW: APPROVE,
        _S.LOCALIZATION: DONE,
        _S.PATCH_GENERATION: GENERATED,
        _S.DEVELOPER_REVIEW: MERGE,
        _S.MANUAL_FIX: SUBMITTED,
        _S.REVIEWER_REVIEW: APPROVE,
        _S.AGENT_VERIFICATION: PASS,
        _S.MANUAL_TESTER_VERIFICATION: PASS,
        _S.DEPLOYMENT: DEPLOYED,
        _S.USER_VERIFICATION: ACCEPT,
    },
    Workflow.TRADITIONAL: {
        _S.REPORT_DIALOGUE: SUBMITTED_REPORT,
        _S.MANUAL_REPRODUCTION: SUCCESS,
        _S.CLASSIFICATION: DONE,
        _S.FEATURE_TRACING: DONE,
        _S.VALIDITY_CHECK: VALID,
        _S.NO_CODE_FIX: PROPOSED_FIX,
        _S.NO_CODE_VERIFICATION: PASS,
        _S.FIX_DECISION: FIX,
        _S.ASSIGNMENT_REVIEW: ASSIGN,
        _S.LOCALIZATION: DONE,
        _S.MANUAL_FIX: SUBMITTED,
        _S.REVIEWER_REVIEW: APPROVE,
        _S.MANUAL_TESTER_VERIFICATION: PASS,
        _S.DEPLOYMENT: DEPLOYED,
        _S.USER_VERIFICATION: ACCEPT,
    },
}


def preferred_outcome(
    stage: Stage, workflow: Workflow = Workflow.PROPOSED, branch: str = VALID
) -> str:
    """The success/approve outcome taken on the happy path."""
    if stage is _S.VALIDITY_CHECK and branch == INVALID:
        return INVALID
    return _PREFERRED[workflow][stage]


def happy_path(workflow: Workflow = Workflow.PROPOSED, branch: str = VALID) -> list[str]:
    """Stage sequence obtained by taking the success outcome everywhere.

    The final element carries the resolution, e.g. ``Closed(Resolved)``.
    """
    case = init_case("report", Thresholds(), case_id="walk")
    path = [case.stage.value]
    while not is_terminal(case.stage):
        kind = preferred_outcome(case.stage, workflow, branch)
        case, _ = step(case, StageOutcome(kind), workflow)
        path.append(case.stage_label())
    return path


def iter_walk(
    workflow: Workflow, outcomes: list[StageOutcome], case: Optional[BugCase] = None
) -> Iterator[tuple[BugCase, list[Effect]]]:
    """Fold a scripted outcome sequence through the table, yielding states."""
    current = case or init_case("report", Thresholds(), case_id="walk")
    for outcome in outcomes:
        current, effects = step(current, outcome, workflow)
        yield current, effects
