"""Discrete-event simulation of both workflows plus an exact oracle.

A scenario drives ``kernel.step`` with sampled outcomes: automated stages
succeed with a configured probability and consume their latency; human
stages queue FIFO for a free server in the role's pool and then consume
that role's service time (reporters never queue — every case has its own).
Metrics quantify the claims the workflow redesign makes: time to
resolution, human touches, and role-to-role handoffs per case.

``enumerate_exact`` expands every outcome path with its probability on an
uncontended case (constant durations, no queueing), yielding exact
expectations that the sampling simulator must approach as replications
grow. Identical (config, seed) pairs reproduce metrics bit-exactly.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import kernel
from .kernel import FixOrigin, Stage, StageOutcome, Thresholds, Workflow


class SimulationError(Exception):
    pass


class InvalidConfig(SimulationError):
    pass


class IncomparableConfigs(SimulationError):
    pass


class PathSpaceTooLarge(SimulationError):
    pass


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True, slots=True)
class Distribution:
    dist: str  # "constant" | "exponential"
    value: float

    def sample(self, rng: random.Random) -> float:
        if self.dist == "constant":
            return self.value
        return rng.expovariate(1.0 / self.value) if self.value > 0 else 0.0

    @property
    def finite_support(self) -> bool:
        return self.dist == "constant"

    def mean(self) -> float:
        return self.value

    def as_dict(self) -> dict:
        key = "value" if self.dist == "constant" else "mean"
        return {"dist": self.dist, key: self.value}

    @classmethod
    def from_dict(cls, data: dict) -> "Distribution":
        kind = data.get("dist")
        if kind == "constant":
            value = float(data["value"])
        elif kind == "exponential":
            value = float(data["mean"])
        else:
            raise InvalidConfig(f"unknown distribution {data!r}")
        if value < 0 or not math.isfinite(value):
            raise InvalidConfig(f"distribution parameter must be finite and >= 0: {data!r}")
        return cls(kind, value)


def constant(value: float) -> Distribution:
    return Distribution("constant", float(value))


# Which role serves each human stage, per workflow. Stages not listed are
# automated in that workflow.
STAGE_ROLE: dict[Workflow, dict[Stage, str]] = {
    Workflow.PROPOSED: {
        Stage.MANUAL_REPRODUCTION: kernel.CUSTOMER_SUPPORT,
        Stage.NO_CODE_VERIFICATION: kernel.CUSTOMER_SUPPORT,
        Stage.MANUAL_NO_CODE_FIX: kernel.CUSTOMER_SUPPORT,
        Stage.FIX_DECISION: kernel.PROJECT_MANAGER,
        Stage.ASSIGNMENT_REVIEW: kernel.TEAM_LEAD,
        Stage.DEVELOPER_REVIEW: kernel.DEVELOPER,
        Stage.MANUAL_FIX: kernel.DEVELOPER,
        Stage.REVIEWER_REVIEW: kernel.REVIEWER,
        Stage.MANUAL_TESTER_VERIFICATION: kernel.TESTER,
        Stage.USER_VERIFICATION: kernel.END_USER,
    },
    Workflow.TRADITIONAL: {
        Stage.REPORT_DIALOGUE: kernel.END_USER,
        Stage.MANUAL_REPRODUCTION: kernel.CUSTOMER_SUPPORT,
        Stage.CLASSIFICATION: kernel.CUSTOMER_SUPPORT,
        Stage.FEATURE_TRACING: kernel.CUSTOMER_SUPPORT,
        Stage.VALIDITY_CHECK: kernel.CUSTOMER_SUPPORT,
        Stage.NO_CODE_FIX: kernel.CUSTOMER_SUPPORT,
        Stage.NO_CODE_VERIFICATION: kernel.CUSTOMER_SUPPORT,
        Stage.FIX_DECISION: kernel.PROJECT_MANAGER,
        Stage.ASSIGNMENT_REVIEW: kernel.TEAM_LEAD,
        Stage.LOCALIZATION: kernel.DEVELOPER,
        Stage.MANUAL_FIX: kernel.DEVELOPER,
        Stage.REVIEWER_REVIEW: kernel.REVIEWER,
        Stage.MANUAL_TESTER_VERIFICATION: kernel.TESTER,
        Stage.DEPLOYMENT: kernel.OPS,
        Stage.USER_VERIFICATION: kernel.END_USER,
    },
}

# The unhappy outcome sampled when a stage "fails"; stages without an entry
# have a single outcome in that workflow.
FAILURE_OUTCOME: dict[Workflow, dict[Stage, str]] = {
    Workflow.PROPOSED: {
        Stage.REPORT_DIALOGUE: kernel.NEEDS_MORE_INFO,
        Stage.AGENT_REPRODUCTION: kernel.FAIL,
        Stage.MANUAL_REPRODUCTION: kernel.CANNOT_REPRODUCE,
        Stage.NO_CODE_VERIFICATION: kernel.FAIL,
        Stage.FIX_DECISION: kernel.WONT_FIX,
        Stage.ASSIGNMENT_REVIEW: kernel.REJECT,
        Stage.DEVELOPER_REVIEW: kernel.REJECT,
        Stage.REVIEWER_REVIEW: kernel.REJECT,
        Stage.AGENT_VERIFICATION: kernel.FAIL,
        Stage.MANUAL_TESTER_VERIFICATION: kernel.FAIL,
        Stage.USER_VERIFICATION: kernel.REJECT,
    },
    Workflow.TRADITIONAL: {
        Stage.MANUAL_REPRODUCTION: kernel.NEEDS_DETAILS,
        Stage.NO_CODE_VERIFICATION: kernel.FAIL,
        Stage.FIX_DECISION: kernel.WONT_FIX,
        Stage.REVIEWER_REVIEW: kernel.REJECT,
        Stage.MANUAL_TESTER_VERIFICATION: kernel.FAIL,
        Stage.USER_VERIFICATION: kernel.REJECT,
    },
}

LOOPED_STAGES: dict[Workflow, tuple[Stage, ...]] = {
    Workflow.PROPOSED: (
        Stage.AGENT_REPRODUCTION,
        Stage.NO_CODE_VERIFICATION,
        Stage.DEVELOPER_REVIEW,
        Stage.AGENT_VERIFICATION,
    ),
    Workflow.TRADITIONAL: (
        Stage.MANUAL_REPRODUCTION,
        Stage.NO_CODE_VERIFICATION,
        Stage.REVIEWER_REVIEW,
        Stage.MANUAL_TESTER_VERIFICATION,
    ),
}

ALL_ROLES = (
    kernel.END_USER,
    kernel.CUSTOMER_SUPPORT,
    kernel.PROJECT_MANAGER,
    kernel.TEAM_LEAD,
    kernel.DEVELOPER,
    kernel.REVIEWER,
    kernel.TESTER,
    kernel.OPS,
)


@dataclass(frozen=True)
class SimConfig:
    workflow: Workflow = Workflow.PROPOSED
    success_prob: dict = field(default_factory=dict)  # stage value -> [0, 1]
    latency: dict = field(default_factory=dict)  # stage value -> Distribution
    default_latency: Distribution = constant(1.0)
    human_pools: dict = field(default_factory=dict)  # role -> servers
    human_service_time: dict = field(default_factory=dict)  # role -> Distribution
    default_service: Distribution = constant(1.0)
    thresholds: Thresholds = Thresholds()
    validity_mix: float = 0.2
    arrival_count: int = 1
    interarrival: Distribution = constant(1.0)
    restart_cap: int = 2
    seed: int = 7

    def validate(self) -> None:
        for stage_name, prob in self.success_prob.items():
            try:
                Stage(stage_name)
            except ValueError as exc:
                raise InvalidConfig(f"unknown stage {stage_name!r}") from exc
            if not 0.0 <= float(prob) <= 1.0:
                raise InvalidConfig(f"success_prob[{stage_name}] = {prob} outside [0, 1]")
        for stage_name in self.latency:
            try:
                Stage(stage_name)
            except ValueError as exc:
                raise InvalidConfig(f"unknown stage {stage_name!r}") from exc
        if not 0.0 <= self.validity_mix <= 1.0:
            raise InvalidConfig(f"validity_mix {self.validity_mix} outside [0, 1]")
        if self.arrival_count < 1:
            raise InvalidConfig("arrivals.count must be >= 1")
        if self.restart_cap < 0 or not math.isfinite(self.restart_cap):
            raise InvalidConfig("restart_cap must be finite and >= 0")
        for role in ALL_ROLES:
            if self.pool_size(role) < 1:
                raise InvalidConfig(f"human pool for {role} must be >= 1")
        for role, dist in self.human_service_time.items():
            if role not in ALL_ROLES:
                raise InvalidConfig(f"unknown role {role!r}")
            if not isinstance(dist, Distribution):
                raise InvalidConfig(f"human_service_time[{role}] is not a distribution")

    # -- accessors ----------------------------------------------------------

    def probability(self, stage: Stage) -> float:
        return float(self.success_prob.get(stage.value, 1.0))

    def stage_latency(self, stage: Stage) -> Distribution:
        return self.latency.get(stage.value, self.default_latency)

    def service(self, role: str) -> Distribution:
        return self.human_service_time.get(role, self.default_service)

    def pool_size(self, role: str) -> int:
        return int(self.human_pools.get(role, 1))

    def stage_role(self, stage: Stage) -> Optional[str]:
        return STAGE_ROLE[self.workflow].get(stage)

    # -- JSON ----------------------------------------------------------------

    def as_dict(self) -> dict:
        return {
            "workflow": self.workflow.value,
            "success_prob": dict(self.success_prob),
            "latency": {
                "default": self.default_latency.as_dict(),
                **{name: dist.as_dict() for name, dist in self.latency.items()},
            },
            "human_pools": dict(self.human_pools),
            "human_service_time": {
                "default": self.default_service.as_dict(),
                **{role: dist.as_dict() for role, dist in self.human_service_time.items()},
            },
            "thresholds": self.thresholds.as_dict(),
            "validity_mix": self.validity_mix,
            "arrivals": {
                "count": self.arrival_count,
                "interarrival": self.interarrival.as_dict(),
            },
            "restart_cap": self.restart_cap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        try:
            workflow = Workflow(data.get("workflow", "proposed"))
        except ValueError as exc:
            raise InvalidConfig(f"unknown workflow {data.get('workflow')!r}") from exc
        latency_spec = dict(data.get("latency", {}))
        default_latency = Distribution.from_dict(
            latency_spec.pop("default", {"dist": "constant", "value": 1.0})
        )
        latency = {name: Distribution.from_dict(spec) for name, spec in latency_spec.items()}
        service_spec = dict(data.get("human_service_time", {}))
        default_service = Distribution.from_dict(
            service_spec.pop("default", {"dist": "constant", "value": 1.0})
        )
        service = {role: Distribution.from_dict(spec) for role, spec in service_spec.items()}
        arrivals = data.get("arrivals", {})
        try:
            thresholds = Thresholds.from_dict(
                data.get("thresholds", {"repro": 3, "nocode": 3, "patch_cycle": 3, "agent_verify": 3})
            )
        except (kernel.ZeroThreshold, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad thresholds: {exc}") from exc
        config = cls(
            workflow=workflow,
            success_prob={k: float(v) for k, v in data.get("success_prob", {}).items()},
            latency=latency,
            default_latency=default_latency,
            human_pools={k: int(v) for k, v in data.get("human_pools", {}).items()},
            human_service_time=service,
            default_service=default_service,
            thresholds=thresholds,
            validity_mix=float(data.get("validity_mix", 0.2)),
            arrival_count=int(arrivals.get("count", 1)),
            interarrival=Distribution.from_dict(
                arrivals.get("interarrival", {"dist": "constant", "value": 1.0})
            ),
            restart_cap=int(data.get("restart_cap", 2)),
            seed=int(data.get("seed", 7)),
        )
        config.validate()
        return config


def default_proposed_config() -> SimConfig:
    config = SimConfig(
        workflow=Workflow.PROPOSED,
        success_prob={
            Stage.AGENT_REPRODUCTION.value: 0.8,
            Stage.NO_CODE_VERIFICATION.value: 0.9,
            Stage.DEVELOPER_REVIEW.value: 0.8,
            Stage.AGENT_VERIFICATION.value: 0.9,
            Stage.USER_VERIFICATION.value: 0.95,
        },
        # The chatbot answers immediately; every other stage costs one unit.
        latency={Stage.REPORT_DIALOGUE.value: constant(0.0)},
        thresholds=Thresholds(3, 3, 3, 3),
        validity_mix=0.2,
        arrival_count=10,
        restart_cap=2,
        seed=7,
    )
    config.validate()
    return config


def default_traditional_config() -> SimConfig:
    config = SimConfig(
        workflow=Workflow.TRADITIONAL,
        success_prob={
            Stage.MANUAL_REPRODUCTION.value: 0.8,
            Stage.NO_CODE_VERIFICATION.value: 0.9,
            Stage.REVIEWER_REVIEW.value: 0.8,
            Stage.MANUAL_TESTER_VERIFICATION.value: 0.9,
            Stage.USER_VERIFICATION.value: 0.95,
        },
        thresholds=Thresholds(3, 3, 3, 3),
        validity_mix=0.2,
        arrival_count=10,
        restart_cap=2,
        seed=7,
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class SimMetrics:
    ttr_mean: float
    ttr_median: float
    ttr_p95: float
    handoffs: float
    hil_touches: float
    escalation_rates: dict
    attempts: dict
    cases: int
    replications: int

    def as_dict(self) -> dict:
        return {
            "ttr": {"mean": self.ttr_mean, "median": self.ttr_median, "p95": self.ttr_p95},
            "handoffs": self.handoffs,
            "hil_touches": self.hil_touches,
            "escalation_rates": dict(self.escalation_rates),
            "attempts": dict(self.attempts),
            "cases": self.cases,
            "replications": self.replications,
        }

    def scalars(self) -> dict:
        return {
            "ttr_mean": self.ttr_mean,
            "ttr_median": self.ttr_median,
            "ttr_p95": self.ttr_p95,
            "handoffs": self.handoffs,
            "hil_touches": self.hil_touches,
        }


@dataclass(slots=True)
class TraceEntry:
    time: float
    case: str
    stage: str
    actor: str
    outcome: str

    def as_row(self) -> str:
        return f"{self.time:.6f},{self.case},{self.stage},{self.actor}"


def traces_to_csv(traces: Iterable[list[TraceEntry]]) -> str:
    lines = ["time,case,stage,actor"]
    for trace in traces:
        lines.extend(entry.as_row() for entry in trace)
    return "\n".join(lines) + "\n"


def _derive_seed(seed: int, replication: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + replication * 0x2545F4914F6CDD1D + 1) % (1 << 64)


def _empirical_quantile(sorted_values: list[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    index = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return sorted_values[index]


# ---------------------------------------------------------------------------
# Sampling simulator

class _CaseRun:
    __slots__ = (
        "name", "case", "arrival", "attempts", "escalations",
        "human_roles", "touches", "close_time", "trace",
    )

    def __init__(self, name: str, case, arrival: float, keep_trace: bool) -> None:
        self.name = name
        self.case = case
        self.arrival = arrival
        self.attempts: dict[Stage, int] = {}
        self.escalations: dict[Stage, int] = {}
        self.human_roles: list[str] = []
        self.touches = 0
        self.close_time = arrival
        self.trace: Optional[list[TraceEntry]] = [] if keep_trace else None


class _Pool:
    __slots__ = ("free", "queue")

    def __init__(self, servers: int) -> None:
        self.free = servers
        self.queue: list = []


def _sample_outcome(config: SimConfig, stage: Stage, case, rng: random.Random) -> StageOutcome:
    workflow = config.workflow
    if stage is Stage.VALIDITY_CHECK:
        invalid = rng.random() < config.validity_mix
        return StageOutcome(kernel.INVALID if invalid else kernel.VALID)
    if stage is Stage.USER_VERIFICATION and case.restart_count >= config.restart_cap:
        return StageOutcome(kernel.ACCEPT)  # the cap forces acceptance
    failure = FAILURE_OUTCOME[workflow].get(stage)
    success_kind = kernel.preferred_outcome(stage, workflow)
    if failure is None:
        return StageOutcome(success_kind)
    if rng.random() < config.probability(stage):
        return StageOutcome(success_kind)
    return StageOutcome(failure)


class _Compiled:
    """Per-stage lookup tables resolved once per simulate() call."""

    __slots__ = ("role", "duration", "actor", "success", "failure", "prob")

    def __init__(self, config: SimConfig) -> None:
        workflow = config.workflow
        roles = STAGE_ROLE[workflow]
        failures = FAILURE_OUTCOME[workflow]
        self.role: dict[Stage, Optional[str]] = {}
        self.duration: dict[Stage, Distribution] = {}
        self.actor: dict[Stage, str] = {}
        self.success: dict[Stage, str] = {}
        self.failure: dict[Stage, Optional[str]] = {}
        self.prob: dict[Stage, float] = {}
        for stage in kernel.stages(workflow):
            if stage is Stage.CLOSED:
                continue
            role = roles.get(stage)
            self.role[stage] = role
            if role is None:
                self.duration[stage] = config.stage_latency(stage)
                self.actor[stage] = f"agent:{_agent_name(stage)}"
            else:
                self.duration[stage] = config.service(role)
                self.actor[stage] = f"{role}:1"
            self.success[stage] = kernel.preferred_outcome(stage, workflow)
            self.failure[stage] = failures.get(stage)
            self.prob[stage] = config.probability(stage)


def _run_single_case(
    config: SimConfig, compiled: _Compiled, rng: random.Random, keep_trace: bool
) -> list[_CaseRun]:
    """One uncontended case: pools are always free, so no event heap."""
    workflow = config.workflow
    validity_mix = config.validity_mix
    restart_cap = config.restart_cap
    case = kernel.init_case("sim", config.thresholds, case_id="sim-0")
    run = _CaseRun("sim-0", case, 0.0, keep_trace)
    now = 0.0
    closed = Stage.CLOSED
    while run.case.stage is not closed:
        stage = run.case.stage
        role = compiled.role[stage]
        now += compiled.duration[stage].sample(rng)
        if stage is Stage.VALIDITY_CHECK:
            kind = kernel.INVALID if rng.random() < validity_mix else kernel.VALID
        elif stage is Stage.USER_VERIFICATION and run.case.restart_count >= restart_cap:
            kind = kernel.ACCEPT
        else:
            failure = compiled.failure[stage]
            if failure is None or rng.random() < compiled.prob[stage]:
                kind = compiled.success[stage]
            else:
                kind = failure
        outcome = StageOutcome(kind)
        rule = kernel.select_rule(run.case, outcome, workflow)
        run.case, _ = rule.apply(run.case, outcome)
        run.attempts[stage] = run.attempts.get(stage, 0) + 1
        if rule.escalates:
            run.escalations[stage] = run.escalations.get(stage, 0) + 1
        if role is not None:
            run.touches += 1
            run.human_roles.append(role)
        if run.trace is not None:
            run.trace.append(
                TraceEntry(now, run.name, stage.value, compiled.actor[stage], kind)
            )
    run.close_time = now
    return [run]


def _run_replication(
    config: SimConfig, compiled: _Compiled, rng: random.Random, keep_traces: bool
) -> list[_CaseRun]:
    if config.arrival_count == 1:
        return _run_single_case(config, compiled, rng, keep_traces)
    workflow = config.workflow
    roles = STAGE_ROLE[workflow]
    pools = {role: _Pool(config.pool_size(role)) for role in ALL_ROLES}
    heap: list = []
    counter = 0
    runs: list[_CaseRun] = []

    def push(time: float, action: str, run: _CaseRun, role: Optional[str] = None) -> None:
        nonlocal counter
        counter += 1
        heapq.heappush(heap, (time, counter, action, run, role))

    def enter_stage(run: _CaseRun, now: float) -> None:
        stage = run.case.stage
        if kernel.is_terminal(stage):
            run.close_time = now
            return
        role = roles.get(stage)
        if role is None:
            push(now + config.stage_latency(stage).sample(rng), "agent_done", run)
        elif role == kernel.END_USER:
            # Reporters are per-case; they never queue on a shared pool.
            push(now + config.service(role).sample(rng), "human_done", run, role)
        else:
            pool = pools[role]
            if pool.free > 0:
                pool.free -= 1
                push(now + config.service(role).sample(rng), "human_done", run, role)
            else:
                pool.queue.append(run)

    def complete(run: _CaseRun, now: float, actor: str, human_role: Optional[str]) -> None:
        stage = run.case.stage
        outcome = _sample_outcome(config, stage, run.case, rng)
        rule = kernel.select_rule(run.case, outcome, workflow)
        run.case, _ = rule.apply(run.case, outcome)
        run.attempts[stage] = run.attempts.get(stage, 0) + 1
        if rule.escalates:
            run.escalations[stage] = run.escalations.get(stage, 0) + 1
        if human_role is not None:
            run.touches += 1
            run.human_roles.append(human_role)
        if run.trace is not None:
            run.trace.append(TraceEntry(now, run.name, stage.value, actor, outcome.kind))
        enter_stage(run, now)

    arrival_time = 0.0
    for index in range(config.arrival_count):
        case = kernel.init_case("sim", config.thresholds, case_id=f"sim-{index}")
        run = _CaseRun(f"sim-{index}", case, arrival_time, keep_traces)
        runs.append(run)
        push(arrival_time, "arrive", run)
        arrival_time += config.interarrival.sample(rng)

    while heap:
        now, _, action, run, role = heapq.heappop(heap)
        if action == "arrive":
            enter_stage(run, now)
        elif action == "agent_done":
            complete(run, now, f"agent:{_agent_name(run.case.stage)}", None)
        elif action == "human_done":
            complete(run, now, f"{role}:1", role)
            if role != kernel.END_USER:
                pool = pools[role]
                if pool.queue:
                    next_run = pool.queue.pop(0)
                    push(now + config.service(role).sample(rng), "human_done", next_run, role)
                else:
                    pool.free += 1
    return runs


_AGENT_NAMES: dict[Stage, str] = {}


def _agent_name(stage: Stage) -> str:
    if not _AGENT_NAMES:
        from .agents import AGENT_FOR_STAGE

        _AGENT_NAMES.update({s: kind.value for s, kind in AGENT_FOR_STAGE.items()})
    return _AGENT_NAMES.get(stage, "unknown")


def _handoffs(human_roles: list[str]) -> int:
    return sum(1 for a, b in zip(human_roles, human_roles[1:]) if a != b)


def _aggregate(runs: list[_CaseRun], workflow: Workflow, replications: int) -> SimMetrics:
    ttrs = sorted(run.close_time - run.arrival for run in runs)
    n = len(runs)
    looped = LOOPED_STAGES[workflow]
    attempts = {
        stage.value: sum(run.attempts.get(stage, 0) for run in runs) / n for stage in looped
    }
    escalations = {
        stage.value: sum(run.escalations.get(stage, 0) for run in runs) / n
        for stage in looped
    }
    return SimMetrics(
        ttr_mean=sum(ttrs) / n,
        ttr_median=_empirical_quantile(ttrs, 0.5),
        ttr_p95=_empirical_quantile(ttrs, 0.95),
        handoffs=sum(_handoffs(run.human_roles) for run in runs) / n,
        hil_touches=sum(run.touches for run in runs) / n,
        escalation_rates=escalations,
        attempts=attempts,
        cases=n,
        replications=replications,
    )


def simulate(
    config: SimConfig,
    replications: int = 1,
    collect_traces: int = 0,
) -> tuple[SimMetrics, list[list[TraceEntry]]]:
    """Run seeded replications; metrics pool every simulated case."""
    config.validate()
    if replications < 1:
        raise InvalidConfig("replications must be >= 1")
    compiled = _Compiled(config)
    all_runs: list[_CaseRun] = []
    traces: list[list[TraceEntry]] = []
    for replication in range(replications):
        rng = random.Random(_derive_seed(config.seed, replication))
        keep = len(traces) < collect_traces
        runs = _run_replication(config, compiled, rng, keep)
        if keep:
            traces.extend(run.trace for run in runs if run.trace is not None)
            del traces[collect_traces:]
        all_runs.extend(runs)
    return _aggregate(all_runs, config.workflow, replications), traces


# ---------------------------------------------------------------------------
# Exact enumeration oracle

class _PathState:
    __slots__ = (
        "case", "prob", "time", "attempts", "escalations",
        "touches", "handoffs", "last_role",
    )

    def __init__(self, case, prob, time, attempts, escalations, touches, handoffs, last_role):
        self.case = case
        self.prob = prob
        self.time = time
        self.attempts = attempts
        self.escalations = escalations
        self.touches = touches
        self.handoffs = handoffs
        self.last_role = last_role


def _branches(config: SimConfig, stage: Stage, case) -> list[tuple[str, float]]:
    workflow = config.workflow
    if stage is Stage.VALIDITY_CHECK:
        return [
            (kind, prob)
            for kind, prob in ((kernel.VALID, 1.0 - config.validity_mix),
                               (kernel.INVALID, config.validity_mix))
            if prob > 0.0
        ]
    if stage is Stage.USER_VERIFICATION and case.restart_count >= config.restart_cap:
        return [(kernel.ACCEPT, 1.0)]
    failure = FAILURE_OUTCOME[workflow].get(stage)
    success_kind = kernel.preferred_outcome(stage, workflow)
    if failure is None:
        return [(success_kind, 1.0)]
    p = config.probability(stage)
    branches = []
    if p > 0.0:
        branches.append((success_kind, p))
    if p < 1.0:
        branches.append((failure, 1.0 - p))
    return branches


def enumerate_exact(config: SimConfig, max_paths: int = 1_000_000) -> SimMetrics:
    """Exhaustive outcome-path expansion with exact probabilities.

    Models a single uncontended case: constant stage durations and idle
    human pools, so queueing delay is zero. Requires finite-support
    distributions; a state-space blowup (e.g. an unbounded retry loop with
    0 < p < 1) aborts with ``PathSpaceTooLarge``.
    """
    config.validate()
    for stage_name, dist in list(config.latency.items()) + [("default", config.default_latency)]:
        if not dist.finite_support:
            raise InvalidConfig(f"latency[{stage_name}] must be constant for exact enumeration")
    for role, dist in list(config.human_service_time.items()) + [("default", config.default_service)]:
        if not dist.finite_support:
            raise InvalidConfig(
                f"human_service_time[{role}] must be constant for exact enumeration"
            )

    workflow = config.workflow
    roles = STAGE_ROLE[workflow]
    looped = LOOPED_STAGES[workflow]
    init = kernel.init_case("exact", config.thresholds, case_id="exact")
    stack = [_PathState(init, 1.0, 0.0, {}, {}, 0, 0, None)]
    expanded = 0

    exp_ttr = 0.0
    ttr_dist: list[tuple[float, float]] = []
    exp_touches = 0.0
    exp_handoffs = 0.0
    exp_attempts = {stage: 0.0 for stage in looped}
    exp_escalations = {stage: 0.0 for stage in looped}
    total_prob = 0.0

    while stack:
        state = stack.pop()
        expanded += 1
        if expanded > max_paths:
            raise PathSpaceTooLarge(
                f"exceeded {max_paths} expanded states; bound the loops or lower probabilities"
            )
        stage = state.case.stage
        if kernel.is_terminal(stage):
            total_prob += state.prob
            exp_ttr += state.prob * state.time
            ttr_dist.append((state.time, state.prob))
            exp_touches += state.prob * state.touches
            exp_handoffs += state.prob * state.handoffs
            for key, count in state.attempts.items():
                exp_attempts[key] += state.prob * count
            for key, count in state.escalations.items():
                exp_escalations[key] += state.prob * count
            continue
        role = roles.get(stage)
        duration = (
            config.service(role).mean() if role is not None
            else config.stage_latency(stage).mean()
        )
        for kind, prob in _branches(config, stage, state.case):
            outcome = StageOutcome(kind)
            rule = kernel.select_rule(state.case, outcome, workflow)
            next_case, _ = rule.apply(state.case, outcome)
            attempts = dict(state.attempts)
            if stage in exp_attempts:
                attempts[stage] = attempts.get(stage, 0) + 1
            escalations = dict(state.escalations)
            if rule.escalates:
                escalations[stage] = escalations.get(stage, 0) + 1
            touches = state.touches
            handoffs = state.handoffs
            last_role = state.last_role
            if role is not None:
                touches += 1
                if last_role is not None and last_role != role:
                    handoffs += 1
                last_role = role
            stack.append(
                _PathState(
                    next_case,
                    state.prob * prob,
                    state.time + duration,
                    attempts,
                    escalations,
                    touches,
                    handoffs,
                    last_role,
                )
            )

    assert abs(total_prob - 1.0) < 1e-9, total_prob
    ttr_dist.sort()

    def weighted_quantile(q: float) -> float:
        cumulative = 0.0
        for value, prob in ttr_dist:
            cumulative += prob
            if cumulative >= q - 1e-12:
                return value
        return ttr_dist[-1][0] if ttr_dist else 0.0

    return SimMetrics(
        ttr_mean=exp_ttr,
        ttr_median=weighted_quantile(0.5),
        ttr_p95=weighted_quantile(0.95),
        handoffs=exp_handoffs,
        hil_touches=exp_touches,
        escalation_rates={stage.value: exp_escalations[stage] for stage in looped},
        attempts={stage.value: exp_attempts[stage] for stage in looped},
        cases=1,
        replications=0,
    )


# ---------------------------------------------------------------------------
# Comparison

def compare(
    config_a: SimConfig, config_b: SimConfig, replications: int = 1
) -> dict:
    """Per-metric differences and ratios between two scenarios (b vs a)."""
    config_a.validate()
    config_b.validate()
    if config_a.arrival_count != config_b.arrival_count:
        raise IncomparableConfigs(
            f"arrival counts differ: {config_a.arrival_count} vs {config_b.arrival_count}"
        )
    metrics_a, _ = simulate(config_a, replications)
    metrics_b, _ = simulate(config_b, replications)
    deltas, ratios = {}, {}
    for key, value_a in metrics_a.scalars().items():
        value_b = metrics_b.scalars()[key]
        deltas[key] = value_b - value_a
        ratios[key] = value_b / value_a if value_a else None
    assumptions = [
        "dialogue latency in each scenario is the configured ReportDialogue "
        f"latency (a={config_a.stage_latency(Stage.REPORT_DIALOGUE).as_dict()}, "
        f"b={config_b.stage_latency(Stage.REPORT_DIALOGUE).as_dict()})",
        "handoffs count role-to-role transfers along the human-touch sequence",
    ]
    return {
        "a": metrics_a.as_dict(),
        "b": metrics_b.as_dict(),
        "delta": deltas,
        "ratio": ratios,
        "assumptions": assumptions,
    }
