"""Orchestration service: intake dialogue, the auto-advance pump, HIL glue.

The service owns no workflow logic of its own: the kernel decides every
transition, the broker stores every artifact, and the task board gates
every human decision. What lives here is the pump (``drive``) that invokes
the current stage's agent, applies the outcome, appends the event, and
materializes effects until the case parks at a human checkpoint, closes,
or an agent becomes unavailable. Every mutation is event-logged before the
next begins, and effect materialization is idempotent per event sequence,
so a crashed pump can always be re-run safely.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from . import agents as ag
from . import kernel
from .broker import ContextBroker, HumanActor, default_policy, utc_now
from .hil import Actor, Role, TaskBoard
from .kernel import BugCase, Effect, Stage, StageOutcome, Thresholds
from .persistence import EventRecord, EventStore
from .simulator import SimConfig, enumerate_exact, simulate


class ServiceError(Exception):
    pass


class Unauthenticated(ServiceError):
    pass


class WrongStage(ServiceError):
    pass


class NotFound(ServiceError):
    pass


STAFF_ROLES = frozenset(
    {
        Role.CUSTOMER_SUPPORT,
        Role.PROJECT_MANAGER,
        Role.TEAM_LEAD,
        Role.DEVELOPER,
        Role.REVIEWER,
        Role.TESTER,
        Role.OPS,
    }
)


@dataclass(frozen=True, slots=True)
class Session:
    actor_id: str
    roles: frozenset[Role]

    def as_actor(self) -> Actor:
        return Actor(self.actor_id, self.roles)


@dataclass
class ServiceConfig:
    """Static wiring: tokens, staffing, candidates, knowledge, storage."""

    tokens: dict = field(default_factory=dict)  # token -> Session
    cs_representative: str = "cs-1"
    project_manager: str = "pm-1"
    candidates: Sequence[ag.Candidate] = ()
    assignment_weights: ag.AssignmentWeights = ag.AssignmentWeights()
    history: Sequence[ag.HistoricalReport] = ()
    docs: Sequence[ag.FeatureDoc] = ()
    thresholds: Thresholds = Thresholds()
    store_dir: Optional[str] = None

    @classmethod
    def demo(cls, store_dir: Optional[str] = None) -> "ServiceConfig":
        tokens = {
            "user-token": Session("user-1", frozenset({Role.END_USER})),
            "user2-token": Session("user-2", frozenset({Role.END_USER})),
            "cs-token": Session("cs-1", frozenset({Role.CUSTOMER_SUPPORT})),
            "pm-token": Session(
                "pm-1", frozenset({Role.PROJECT_MANAGER, Role.TEAM_LEAD})
            ),
            "dev-token": Session("dev-1", frozenset({Role.DEVELOPER})),
            "dev2-token": Session("dev-2", frozenset({Role.DEVELOPER, Role.REVIEWER})),
            "qa-token": Session("qa-1", frozenset({Role.TESTER})),
            "ops-token": Session("ops-1", frozenset({Role.OPS})),
        }
        candidates = [
            ag.Candidate("dev-1", frozenset({"login", "auth", "session", "crash"}), 2),
            ag.Candidate("dev-2", frozenset({"ui", "layout", "render", "overlap"}), 1),
            ag.Candidate("dev-3", frozenset({"performance", "query", "cache", "slow"}), 0),
        ]
        docs = [
            ag.FeatureDoc("login", "after submitting credentials the user lands on the dashboard"),
            ag.FeatureDoc("export", "exports are generated asynchronously and emailed"),
        ]
        return cls(tokens=tokens, candidates=candidates, docs=docs, store_dir=store_dir)

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceConfig":
        tokens = {}
        for token, spec in data.get("tokens", {}).items():
            tokens[token] = Session(
                spec["actor_id"], frozenset(Role(r) for r in spec["roles"])
            )
        candidates = [
            ag.Candidate(
                c["developer_id"], frozenset(c.get("history_terms", [])), int(c.get("open_workload", 0))
            )
            for c in data.get("candidates", [])
        ]
        docs = [
            ag.FeatureDoc(d["feature"], d["intended_behavior"]) for d in data.get("docs", [])
        ]
        history = [
            ag.HistoricalReport(h["report_id"], h.get("title", ""), h.get("text", ""))
            for h in data.get("history", [])
        ]
        thresholds = Thresholds.from_dict(
            data.get("thresholds", {"repro": 3, "nocode": 3, "patch_cycle": 3, "agent_verify": 3})
        )
        return cls(
            tokens=tokens,
            cs_representative=data.get("cs_representative", "cs-1"),
            project_manager=data.get("project_manager", "pm-1"),
            candidates=candidates,
            docs=docs,
            history=history,
            thresholds=thresholds,
            store_dir=data.get("store_dir"),
        )


@dataclass
class _DialogueState:
    reporter: str
    report: ag.BugReportModel
    transcript: list[ag.DialogueTurn] = field(default_factory=list)
    pending_field: Optional[str] = None

    def add_answer(self, text: str) -> None:
        if self.pending_field is None and self.report.observed_behavior.strip():
            # Unprompted detail amends the observed behavior.
            self.report.observed_behavior += f"; update: {text.strip()}"
            self.transcript.append(ag.DialogueTurn("user", text, None))
        else:
            target = self.pending_field or "observed_behavior"
            self.transcript.append(ag.DialogueTurn("user", text, target))

    def add_question(self, question: str, target: str) -> None:
        self.transcript.append(ag.DialogueTurn("bot", question, target))
        self.pending_field = target


# Artifact kinds surfaced in review-task payloads, per pausing stage.
_REVIEW_KINDS: dict[Stage, tuple[str, ...]] = {
    Stage.MANUAL_REPRODUCTION: ("EnhancedReport", "OriginalReport"),
    Stage.NO_CODE_VERIFICATION: ("NoCodeFixProposal",),
    Stage.MANUAL_NO_CODE_FIX: ("NoCodeFixProposal", "ValidityVerdict"),
    Stage.FIX_DECISION: ("EnhancedReport", "ClassificationRecord", "ValidityVerdict"),
    Stage.ASSIGNMENT_REVIEW: ("EnhancedReport", "ClassificationRecord"),
    Stage.DEVELOPER_REVIEW: ("PatchCandidate",),
    Stage.MANUAL_FIX: ("PatchCandidate", "VerificationResult"),
    Stage.REVIEWER_REVIEW: ("PatchCandidate",),
    Stage.MANUAL_TESTER_VERIFICATION: ("PatchCandidate", "VerificationResult"),
    Stage.USER_VERIFICATION: ("DeploymentReport", "NoCodeFixProposal"),
}


class BugTracker:
    """The live engine behind the HTTP endpoints."""

    def __init__(
        self,
        config: Optional[ServiceConfig] = None,
        agent_overrides: Optional[dict] = None,
        clock=None,
    ) -> None:
        self.config = config or ServiceConfig.demo()
        self.clock = clock or utc_now
        self.store = EventStore(self.config.store_dir, clock=self.clock)
        self.broker = ContextBroker(policy=default_policy(), clock=self.clock)
        self.board = TaskBoard()
        self.agents = ag.default_agents(
            history=self.config.history,
            docs=self.config.docs,
            candidates=self.config.candidates,
            weights=self.config.assignment_weights,
        )
        if agent_overrides:
            self.agents.update(agent_overrides)
        self.descriptors: dict[ag.AgentKind, ag.AgentDescriptor] = {}
        for kind in ag.AgentKind:
            descriptor = ag.AgentDescriptor(f"ref-{kind.value}", kind, 1)
            self.broker.register_agent(descriptor)
            self.descriptors[kind] = descriptor
        self._dialogues: dict[str, _DialogueState] = {}
        self._reporters: dict[str, str] = {}
        self._excluded: dict[str, set[str]] = {}
        self._notified: dict[str, set[int]] = {}
        self._notifications: dict[str, list[dict]] = {}
        self._case_locks: dict[str, threading.RLock] = {}
        self._id_lock = threading.Lock()
        self._case_counter = 0

    # -- authentication -------------------------------------------------------

    def authenticate(self, token: Optional[str]) -> Session:
        session = self.config.tokens.get(token or "")
        if session is None:
            raise Unauthenticated("missing or unknown bearer token")
        return session

    # -- helpers ---------------------------------------------------------------

    def _new_case_id(self) -> str:
        with self._id_lock:
            self._case_counter += 1
            return f"case-{self._case_counter:06d}"

    def _lock(self, case_id: str) -> threading.RLock:
        with self._id_lock:
            return self._case_locks.setdefault(case_id, threading.RLock())

    def _head(self, case_id: str) -> BugCase:
        if not self.store.exists(case_id):
            raise NotFound(f"unknown case {case_id}")
        return self.store.head(case_id)

    def _human_actor_dict(self, session: Session, role: Role) -> dict:
        return {"type": "human", "actor_id": session.actor_id, "role": role.value}

    def _agent_actor_dict(self, descriptor: ag.AgentDescriptor) -> dict:
        return {"type": "agent", **descriptor.as_dict()}

    def _write_transcript(self, case_id: str) -> None:
        state = self._dialogues[case_id]
        content = json.dumps(
            {"turns": [turn.as_dict() for turn in state.transcript]},
            ensure_ascii=False,
        ).encode("utf-8")
        self.broker.put_artifact(
            case_id, "DialogueTranscript", content,
            self.descriptors[ag.AgentKind.CHATBOT_INTAKE],
        )

    # -- intake ---------------------------------------------------------------

    def submit_report(
        self,
        session: Session,
        text: str,
        metadata: Optional[dict] = None,
        title: str = "",
    ) -> dict:
        """Open a case from the first chat message; may complete immediately."""
        if Role.END_USER not in session.roles:
            raise Unauthenticated("bug reports are submitted by end users")
        case_id = self._new_case_id()
        case = kernel.init_case(f"report:{case_id}", self.config.thresholds, case_id=case_id)
        self.store.open_case(case, self._human_actor_dict(session, Role.END_USER))
        self.broker.open_case(case_id)
        environment = {
            str(k).lower(): str(v) for k, v in (metadata or {}).items() if str(v).strip()
        }
        report = ag.BugReportModel(
            observed_behavior=text.strip(), environment=environment, title=title.strip()
        )
        state = _DialogueState(reporter=session.actor_id, report=report)
        state.transcript.append(ag.DialogueTurn("user", text, "observed_behavior"))
        self._dialogues[case_id] = state
        self._reporters[case_id] = session.actor_id
        with self._lock(case_id):
            result = self._chatbot_turn(case_id)
        result["case_id"] = case_id
        return result

    def dialogue_turn(self, case_id: str, session: Session, answer: str) -> dict:
        """One reporter answer; advances the case when the report completes."""
        case = self._head(case_id)
        if self._reporters.get(case_id) != session.actor_id:
            raise Unauthenticated("only the reporting user may continue the dialogue")
        if case.stage is not Stage.REPORT_DIALOGUE:
            raise WrongStage(f"case {case_id} is at {case.stage.value}")
        with self._lock(case_id):
            state = self._dialogues[case_id]
            state.add_answer(answer)
            result = self._chatbot_turn(case_id)
        result["case_id"] = case_id
        return result

    def _chatbot_turn(self, case_id: str) -> dict:
        state = self._dialogues[case_id]
        case = self._head(case_id)
        descriptor = self.descriptors[ag.AgentKind.CHATBOT_INTAKE]
        invocation = ag.AgentInvocation(
            case_id,
            Stage.REPORT_DIALOGUE,
            case.thresholds,
            artifacts=[],
            context={
                "transcript": [turn.as_dict() for turn in state.transcript],
                "report": state.report.as_dict(),
            },
        )
        response = ag.invoke(descriptor, self.agents[ag.AgentKind.CHATBOT_INTAKE], invocation)
        self._write_transcript(case_id)
        if response.outcome.kind == kernel.NEEDS_MORE_INFO:
            question = response.outcome.payload["question"]
            target = response.outcome.payload["target_field"]
            new_case, effects = kernel.step(case, response.outcome)
            self.store.append(
                case_id, case.stage, response.outcome, effects,
                self._agent_actor_dict(descriptor), new_case,
            )
            state.add_question(question, target)
            return {
                "status": "dialogue",
                "prompt": {"question": question, "target_field": target},
                "case": self._summary(new_case),
            }
        # Sufficient: the compiled report becomes OriginalReport v1 of this cycle.
        for kind, content in response.produced_artifacts:
            self.broker.put_artifact(case_id, kind, content, descriptor)
        new_case, effects = kernel.step(case, response.outcome)
        record = self.store.append(
            case_id, case.stage, response.outcome, effects,
            self._agent_actor_dict(descriptor), new_case,
        )
        self._materialize(new_case, response.outcome, effects, record.seq, None)
        driven = self.drive(case_id)
        return {"status": "submitted", "case": self._summary(driven)}

    # -- the pump ---------------------------------------------------------------

    def drive(self, case_id: str) -> BugCase:
        """Advance through agent stages until a human gate, closure, or outage."""
        with self._lock(case_id):
            case = self._head(case_id)
            self._recover_effects(case_id, case)
            while True:
                if kernel.is_terminal(case.stage):
                    return case
                if self.board.open_task(case_id) is not None:
                    return case
                if case.stage is Stage.REPORT_DIALOGUE:
                    return case
                kind = ag.AGENT_FOR_STAGE[case.stage]
                descriptor = self.broker.active_agent(kind)
                agent = self.agents[kind]
                invocation = ag.AgentInvocation(
                    case_id,
                    case.stage,
                    case.thresholds,
                    artifacts=self.broker.readable_slice(case_id, descriptor),
                    context=self._agent_context(case),
                )
                response = ag.invoke(descriptor, agent, invocation)
                for artifact_kind, content in response.produced_artifacts:
                    self.broker.put_artifact(case_id, artifact_kind, content, descriptor)
                outcome = self._enrich_outcome(response.outcome)
                new_case, effects = kernel.step(case, outcome)
                record = self.store.append(
                    case_id, case.stage, outcome, effects,
                    self._agent_actor_dict(descriptor), new_case,
                )
                self._materialize(new_case, outcome, effects, record.seq, None)
                case = new_case

    def _agent_context(self, case: BugCase) -> dict:
        context: dict = {}
        if case.stage is Stage.AGENT_REPRODUCTION:
            context["attempt"] = case.repro_count + 1
        elif case.stage is Stage.NO_CODE_FIX:
            context["attempt"] = case.nocode_verify_count + 1
        elif case.stage is Stage.ASSIGNMENT_RECOMMENDATION:
            context["excluded_developers"] = sorted(self._excluded.get(case.case_id, set()))
        return context

    def _enrich_outcome(self, outcome: StageOutcome) -> StageOutcome:
        """Inject configured staffing so the kernel can assign accountability."""
        if outcome.kind == kernel.INVALID:
            payload = dict(outcome.payload)
            payload.setdefault("assignee", self.config.cs_representative)
            return StageOutcome(outcome.kind, payload)
        if outcome.kind == kernel.VALID:
            payload = dict(outcome.payload)
            payload.setdefault("assignee", self.config.project_manager)
            return StageOutcome(outcome.kind, payload)
        return outcome

    def _recover_effects(self, case_id: str, case: BugCase) -> None:
        """Re-materialize the last event's effects (idempotent by seq)."""
        records = self.store.events(case_id)
        last = records[-1]
        if last.outcome.get("kind") == "CaseOpened":
            return
        effects = [kernel.effect_from_dict(e) for e in last.effects]
        outcome = StageOutcome(last.outcome["kind"], dict(last.outcome.get("payload", {})))
        producer = None
        if last.actor.get("type") == "human":
            producer = HumanActor(last.actor["actor_id"], last.actor["role"])
        self._materialize(case, outcome, effects, last.seq, producer, recovery=True)

    def _materialize(
        self,
        case: BugCase,
        outcome: StageOutcome,
        effects: Sequence[Effect],
        seq: int,
        producer: Optional[HumanActor],
        recovery: bool = False,
    ) -> None:
        case_id = case.case_id
        for effect in effects:
            if isinstance(effect, kernel.CreateHilTask):
                self.board.create_task(
                    case_id,
                    Role(effect.role),
                    case.stage,
                    effect.action_set,
                    payload=self._task_payload(case, outcome),
                    source_seq=seq,
                )
            elif isinstance(effect, kernel.NotifyUser):
                seen = self._notified.setdefault(case_id, set())
                if seq not in seen:
                    seen.add(seq)
                    self._notifications.setdefault(case_id, []).append(
                        {"seq": seq, "message_kind": effect.message_kind,
                         "timestamp": self.clock()}
                    )
            elif isinstance(effect, kernel.RecordArtifact) and not recovery:
                if producer is None:
                    continue
                content = json.dumps(
                    {k: v for k, v in outcome.payload.items() if k != "decided_by"},
                    ensure_ascii=False, sort_keys=True,
                ).encode("utf-8")
                self.broker.put_artifact(case_id, effect.kind, content, producer)
            elif isinstance(effect, kernel.InvokeAgent):
                if (
                    effect.agent_kind == kernel.CHATBOT_INTAKE
                    and case.stage is Stage.REPORT_DIALOGUE
                ):
                    self._reset_dialogue_after_restart(case)

    def _task_payload(self, case: BugCase, outcome: StageOutcome) -> dict:
        payload: dict = {"stage": case.stage.value}
        if case.stage is Stage.ASSIGNMENT_REVIEW:
            payload["ranking"] = outcome.payload.get("ranking", [])
            payload["excluded"] = outcome.payload.get("excluded", [])
        if case.stage is Stage.REVIEWER_REVIEW:
            payload["fix_author"] = outcome.payload.get("decided_by")
        artifacts = []
        for kind in _REVIEW_KINDS.get(case.stage, ()):
            versions = self.broker.versions(case.case_id, kind)
            if versions:
                artifacts.append(
                    {"kind": kind, "version": versions,
                     "artifact_id": f"{case.case_id}/{kind}/v{versions}"}
                )
        if artifacts:
            payload["artifacts"] = artifacts
        return payload

    def _reset_dialogue_after_restart(self, case: BugCase) -> None:
        """Seed the next reporting cycle with the enriched report."""
        if case.restart_count == 0:
            return
        case_id = case.case_id
        reporter = self._reporters.get(case_id, "unknown")
        try:
            record = self.broker.get_artifact(
                case_id, "EnhancedReport", self.descriptors[ag.AgentKind.CHATBOT_INTAKE]
            )
            report = ag.BugReportModel.from_dict(json.loads(record.content))
        except Exception:
            report = ag.BugReportModel()
        self._dialogues[case_id] = _DialogueState(reporter=reporter, report=report)

    # -- queries -----------------------------------------------------------------

    def _summary(self, case: BugCase) -> dict:
        open_task = self.board.open_task(case.case_id)
        return {
            "case_id": case.case_id,
            "stage": case.stage.value,
            "stage_label": case.stage_label(),
            "resolution": case.resolution.value if case.resolution else None,
            "counters": case.counters(),
            "thresholds": case.thresholds.as_dict(),
            "fix_origin": case.fix_origin.value,
            "responsible_human": case.responsible_human,
            "restart_count": case.restart_count,
            "open_task": open_task.as_dict() if open_task else None,
        }

    def _require_read_access(self, case_id: str, session: Session) -> None:
        if session.roles & STAFF_ROLES:
            return
        if self._reporters.get(case_id) == session.actor_id:
            return
        from .broker import PolicyDenied

        raise PolicyDenied(f"{session.actor_id} may not view case {case_id}")

    def get_case(self, case_id: str, session: Session) -> dict:
        case = self._head(case_id)
        self._require_read_access(case_id, session)
        return self._summary(case)

    def get_timeline(self, case_id: str, session: Session) -> dict:
        case = self._head(case_id)
        self._require_read_access(case_id, session)
        records = self.store.events(case_id)
        entries = []
        for index, record in enumerate(records):
            if index + 1 < len(records):
                stage_after = records[index + 1].stage_before
            else:
                stage_after = case.stage_label()
            entries.append(
                {
                    "seq": record.seq,
                    "stage_before": record.stage_before,
                    "stage_after": stage_after,
                    "outcome": record.outcome,
                    "effects": record.effects,
                    "actor": record.actor,
                    "counters_after": record.counters_after,
                    "timestamp": record.timestamp,
                }
            )
        return {
            "case_id": case_id,
            "stage_label": case.stage_label(),
            "events": entries,
            "artifacts": [r.export_dict() for r in self.broker.list_artifacts(case_id)],
            "provenance": [p.as_dict() for p in self.broker.provenance(case_id)],
            "notifications": list(self._notifications.get(case_id, [])),
        }

    def list_tasks(self, role: Role, session: Session) -> list[dict]:
        return [task.as_dict() for task in self.board.list_tasks(role)]

    # -- decisions ----------------------------------------------------------------

    def post_decision(
        self,
        task_id: str,
        session: Session,
        decision: str,
        payload: Optional[dict] = None,
    ) -> dict:
        task = self.board.get(task_id)
        case_id = task.case_id
        if (
            task.role is Role.END_USER
            and self._reporters.get(case_id) not in (None, session.actor_id)
        ):
            raise Unauthenticated("only the reporting user may verify this case")
        with self._lock(case_id):
            case = self._head(case_id)
            payload = dict(payload or {})
            if task.stage is Stage.ASSIGNMENT_REVIEW:
                if decision == kernel.APPROVE and "developer" not in payload:
                    ranking = task.payload.get("ranking") or []
                    if ranking:
                        payload["developer"] = ranking[0]["developer"]
                if decision == kernel.REJECT:
                    ranking = task.payload.get("ranking") or []
                    rejected = payload.get("exclude") or (
                        ranking[0]["developer"] if ranking else None
                    )
                    if rejected:
                        self._excluded.setdefault(case_id, set()).add(rejected)
            outcome = self.board.submit_decision(
                task_id, session.as_actor(), decision, payload
            )
            new_case, effects = kernel.step(case, outcome)
            record = self.store.append(
                case_id, case.stage, outcome, effects,
                self._human_actor_dict(session, task.role), new_case,
            )
            self._materialize(
                new_case, outcome, effects, record.seq,
                HumanActor(session.actor_id, task.role.value),
            )
        parked = False
        try:
            driven = self.drive(case_id)
        except ag.AgentUnavailable:
            parked = True
            driven = self._head(case_id)
        summary = self._summary(driven)
        summary["parked"] = parked
        return summary

    # -- simulation ----------------------------------------------------------------

    def run_simulation(
        self, config_data: dict, replications: int = 1, exact: bool = False
    ) -> dict:
        config = SimConfig.from_dict(config_data)
        metrics, _ = simulate(config, replications=replications)
        result = {"metrics": metrics.as_dict()}
        if exact:
            result["exact"] = enumerate_exact(config).as_dict()
        return result

    # -- export ---------------------------------------------------------------------

    def export_case_log(self, case_id: str) -> bytes:
        if not self.store.exists(case_id):
            raise NotFound(f"unknown case {case_id}")
        return self.store.export_log(case_id)

    def export_case_artifacts(self, case_id: str) -> bytes:
        return self.broker.export_case(case_id)
