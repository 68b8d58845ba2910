"""Agent contracts, deterministic reference agents, and scripted stand-ins.

Every automated stage of the proposed workflow is served by one agent kind.
Reference agents are rule-based and pure: given the same request, artifact
slice, and (for scripted agents) script position they always produce the
same response, which keeps the whole pipeline replayable. A remote adapter
speaks a small JSON wire schema so a real LLM backend can be plugged in
behind the same contract; transport failures surface as ``AgentUnavailable``
and are deliberately distinct from a semantic ``Fail`` outcome, so they
never consume a lifecycle iteration.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

from . import kernel
from .kernel import Stage, StageOutcome, Thresholds


class AgentKind(str, Enum):
    CHATBOT_INTAKE = kernel.CHATBOT_INTAKE
    ENHANCER = kernel.ENHANCER
    REPRODUCER = kernel.REPRODUCER
    CLASSIFIER = kernel.CLASSIFIER
    FEATURE_TRACER = kernel.FEATURE_TRACER
    VALIDITY_CHECKER = kernel.VALIDITY_CHECKER
    ASSIGNER = kernel.ASSIGNER
    NOCODE_FIXER = kernel.NOCODE_FIXER
    LOCALIZER = kernel.LOCALIZER
    PATCH_GENERATOR = kernel.PATCH_GENERATOR
    VERIFIER = kernel.VERIFIER
    DEPLOYMENT_ASSISTANT = kernel.DEPLOYMENT_ASSISTANT


AGENT_FOR_STAGE: dict[Stage, AgentKind] = {
    Stage.REPORT_DIALOGUE: AgentKind.CHATBOT_INTAKE,
    Stage.ENHANCEMENT: AgentKind.ENHANCER,
    Stage.AGENT_REPRODUCTION: AgentKind.REPRODUCER,
    Stage.CLASSIFICATION: AgentKind.CLASSIFIER,
    Stage.FEATURE_TRACING: AgentKind.FEATURE_TRACER,
    Stage.VALIDITY_CHECK: AgentKind.VALIDITY_CHECKER,
    Stage.NO_CODE_FIX: AgentKind.NOCODE_FIXER,
    Stage.ASSIGNMENT_RECOMMENDATION: AgentKind.ASSIGNER,
    Stage.LOCALIZATION: AgentKind.LOCALIZER,
    Stage.PATCH_GENERATION: AgentKind.PATCH_GENERATOR,
    Stage.AGENT_VERIFICATION: AgentKind.VERIFIER,
    Stage.DEPLOYMENT: AgentKind.DEPLOYMENT_ASSISTANT,
}


class AgentError(Exception):
    """Base class for agent-layer errors."""


class AgentUnavailable(AgentError):
    """Transport-level failure; retryable, not a stage outcome."""


class MalformedResponse(AgentError):
    """The remote agent violated the wire schema or stage contract."""


class ScriptExhausted(AgentError):
    """A scripted agent ran out of scripted outcomes (test misconfiguration)."""


class NoCandidates(AgentError):
    """Assignment was requested with an empty candidate set."""


@dataclass(frozen=True, slots=True)
class AgentDescriptor:
    name: str
    kind: AgentKind
    version: int

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "version": self.version}


@dataclass(slots=True)
class AgentInvocation:
    """Stage context handed to an agent, with a policy-filtered artifact slice."""

    case_id: str
    stage: Stage
    thresholds: Thresholds
    artifacts: list[dict] = field(default_factory=list)  # {kind, version, content}
    context: dict = field(default_factory=dict)

    def latest(self, kind: str) -> Optional[dict]:
        best = None
        for item in self.artifacts:
            if item["kind"] == kind and (best is None or item["version"] > best["version"]):
                best = item
        return best

    def latest_json(self, kind: str) -> Optional[dict]:
        item = self.latest(kind)
        if item is None:
            return None
        content = item["content"]
        if isinstance(content, bytes):
            content = content.decode("utf-8")
        return json.loads(content)


@dataclass(slots=True)
class AgentResponse:
    outcome: StageOutcome
    produced_artifacts: list[tuple[str, bytes]] = field(default_factory=list)
    rationale: str = ""


# ---------------------------------------------------------------------------
# Bug report model and intake dialogue

REQUIRED_FIELDS = (
    "observed_behavior",
    "expected_behavior",
    "steps_to_reproduce",
    "environment",
)

FIELD_QUESTIONS = {
    "observed_behavior": "What happened? Please describe the behavior you observed.",
    "expected_behavior": "What did you expect to happen?",
    "steps_to_reproduce": "Which steps lead to the problem? Please list them in order.",
    "environment": "Which OS, app version, browser, or device were you using?",
}

ASSUMED_MARKER = "[assumed]"


@dataclass(slots=True)
class BugReportModel:
    observed_behavior: str = ""
    expected_behavior: str = ""
    steps_to_reproduce: list[str] = field(default_factory=list)
    environment: dict[str, str] = field(default_factory=dict)
    severity_hint: Optional[str] = None
    attachments: list[str] = field(default_factory=list)
    title: str = ""

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "observed_behavior": self.observed_behavior,
            "expected_behavior": self.expected_behavior,
            "steps_to_reproduce": list(self.steps_to_reproduce),
            "environment": dict(self.environment),
            "severity_hint": self.severity_hint,
            "attachments": list(self.attachments),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BugReportModel":
        return cls(
            observed_behavior=data.get("observed_behavior", ""),
            expected_behavior=data.get("expected_behavior", ""),
            steps_to_reproduce=list(data.get("steps_to_reproduce", [])),
            environment=dict(data.get("environment", {})),
            severity_hint=data.get("severity_hint"),
            attachments=list(data.get("attachments", [])),
            title=data.get("title", ""),
        )

    def copy(self) -> "BugReportModel":
        return BugReportModel.from_dict(self.as_dict())


@dataclass(frozen=True, slots=True)
class QualityRecord:
    missing_fields: frozenset[str]
    completeness: float


@dataclass(frozen=True, slots=True)
class DialogueTurn:
    speaker: str  # "user" | "bot"
    text: str
    target_field: Optional[str] = None

    def as_dict(self) -> dict:
        return {"speaker": self.speaker, "text": self.text, "target_field": self.target_field}


@dataclass(frozen=True, slots=True)
class FollowUp:
    target_field: str
    question: str


class Sufficient:
    """Marker: the report covers all required fields."""

    def __eq__(self, other) -> bool:
        return isinstance(other, Sufficient)

    def __repr__(self) -> str:
        return "Sufficient()"


def _populated(report: BugReportModel, name: str) -> bool:
    if name == "observed_behavior":
        return bool(report.observed_behavior.strip())
    if name == "expected_behavior":
        return bool(report.expected_behavior.strip())
    if name == "steps_to_reproduce":
        return any(step.strip() for step in report.steps_to_reproduce)
    if name == "environment":
        return any(str(v).strip() for v in report.environment.values())
    raise ValueError(name)


def assess_quality(report: BugReportModel) -> QualityRecord:
    """Report completeness as populated required fields over four."""
    missing = frozenset(f for f in REQUIRED_FIELDS if not _populated(report, f))
    return QualityRecord(missing, (4 - len(missing)) / 4)


def _parse_steps(text: str) -> list[str]:
    parts = [p.strip() for p in re.split(r"[\n;]+", text)]
    return [p for p in parts if p]


def _parse_environment(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for chunk in re.split(r"[\n,;]+", text):
        if ":" in chunk:
            key, _, value = chunk.partition(":")
        elif "=" in chunk:
            key, _, value = chunk.partition("=")
        else:
            continue
        key, value = key.strip().lower(), value.strip()
        if key and value:
            pairs[key] = value
    if not pairs and text.strip():
        pairs["notes"] = text.strip()
    return pairs


def merge_transcript(report: BugReportModel, transcript: Sequence[DialogueTurn]) -> BugReportModel:
    """Fold targeted user answers from the dialogue into the report fields."""
    merged = report.copy()
    for turn in transcript:
        if turn.speaker != "user" or not turn.text.strip():
            continue
        target = turn.target_field
        if target == "observed_behavior" and not merged.observed_behavior.strip():
            merged.observed_behavior = turn.text.strip()
        elif target == "expected_behavior" and not merged.expected_behavior.strip():
            merged.expected_behavior = turn.text.strip()
        elif target == "steps_to_reproduce" and not any(
            s.strip() for s in merged.steps_to_reproduce
        ):
            merged.steps_to_reproduce = _parse_steps(turn.text)
        elif target == "environment" and not any(
            str(v).strip() for v in merged.environment.values()
        ):
            merged.environment = _parse_environment(turn.text)
    return merged


def next_prompt(
    transcript: Sequence[DialogueTurn], report: BugReportModel
) -> FollowUp | Sufficient:
    """One question at a time, targeting the first missing required field."""
    effective = merge_transcript(report, transcript)
    quality = assess_quality(effective)
    for name in REQUIRED_FIELDS:
        if name in quality.missing_fields:
            return FollowUp(name, FIELD_QUESTIONS[name])
    return Sufficient()


_STEP_NUMBER = re.compile(r"^\s*\d+[.):\-]?\s*")
_EXPECT_SENTENCE = re.compile(r"[^.!?]*\bexpect\w*\b[^.!?]*[.!?]?", re.IGNORECASE)


def enhance(
    report: BugReportModel, transcript: Sequence[DialogueTurn] = ()
) -> tuple[BugReportModel, str]:
    """Normalized, gap-filled copy of the report plus an enhancement note.

    The input report is never mutated; stores keep both versions. Steps are
    renumbered 1..n, environment keys are lower-cased, and any required
    field that is still empty after folding in the dialogue is filled with
    an ``[assumed]`` placeholder so downstream agents see every field.
    """
    merged = merge_transcript(report, transcript)
    notes: list[str] = []

    if not merged.expected_behavior.strip():
        for turn in transcript:
            if turn.speaker != "user":
                continue
            match = _EXPECT_SENTENCE.search(turn.text)
            if match:
                merged.expected_behavior = match.group(0).strip()
                notes.append("expected behavior lifted from the dialogue")
                break

    steps = [s for s in (step.strip() for step in merged.steps_to_reproduce) if s]
    merged.steps_to_reproduce = [
        f"{i}. {_STEP_NUMBER.sub('', step)}" for i, step in enumerate(steps, start=1)
    ]
    merged.environment = {
        str(key).lower(): str(value) for key, value in merged.environment.items()
    }

    placeholders = {
        "observed_behavior": f"{ASSUMED_MARKER} behavior not described by the reporter",
        "expected_behavior": f"{ASSUMED_MARKER} the feature works as documented",
    }
    for name in ("observed_behavior", "expected_behavior"):
        if not _populated(merged, name):
            setattr(merged, name, placeholders[name])
            notes.append(f"{name} missing; placeholder inserted")
    if not _populated(merged, "steps_to_reproduce"):
        merged.steps_to_reproduce = [f"1. {ASSUMED_MARKER} no reliable steps provided"]
        notes.append("steps_to_reproduce missing; placeholder inserted")
    if not _populated(merged, "environment"):
        merged.environment = {"notes": f"{ASSUMED_MARKER} environment not reported"}
        notes.append("environment missing; placeholder inserted")

    rationale = "; ".join(notes) if notes else "report was already complete; normalized only"
    return merged, rationale


# ---------------------------------------------------------------------------
# Classification

SEVERITIES = ("critical", "major", "normal", "minor", "trivial")
BUG_TYPES = ("crash", "functional", "performance", "ui", "security")
PRIORITIES = ("p1", "p2", "p3", "p4")


@dataclass(frozen=True, slots=True)
class ClassificationRecord:
    bug_type: str
    severity: str
    priority: str

    def as_dict(self) -> dict:
        return {"type": self.bug_type, "severity": self.severity, "priority": self.priority}


# First matching row wins; single words match whole tokens, phrases match
# the normalized text.
_CLASSIFICATION_RULES: tuple[tuple[tuple[str, ...], ClassificationRecord], ...] = (
    (("crash",), ClassificationRecord("crash", "critical", "p1")),
    (("data loss",), ClassificationRecord("functional", "critical", "p1")),
    (("slow", "latency"), ClassificationRecord("performance", "normal", "p2")),
    (("misaligned", "overlap"), ClassificationRecord("ui", "minor", "p3")),
    (("injection", "leak"), ClassificationRecord("security", "major", "p1")),
)
_CLASSIFICATION_FALLBACK = ClassificationRecord("functional", "normal", "p3")


def tokenize(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def classify(report: BugReportModel) -> ClassificationRecord:
    """Keyword rule-table classification over the report's behavior text."""
    text = f"{report.observed_behavior} {report.expected_behavior}".lower()
    normalized = " ".join(re.findall(r"[a-z0-9]+", text))
    tokens = set(normalized.split())
    for keywords, record in _CLASSIFICATION_RULES:
        for keyword in keywords:
            if " " in keyword:
                if keyword in normalized:
                    return record
            elif keyword in tokens:
                return record
    return _CLASSIFICATION_FALLBACK


# ---------------------------------------------------------------------------
# Validity checking

INVALID_CATEGORIES = ("UserError", "Duplicate", "ConfigurationError")
DUPLICATE_OVERLAP_THRESHOLD = 0.9

_CONFIG_TOKENS = {"config", "configuration", "misconfigured", "setting", "settings"}


@dataclass(frozen=True, slots=True)
class HistoricalReport:
    report_id: str
    title: str
    text: str


@dataclass(frozen=True, slots=True)
class FeatureDoc:
    feature: str
    intended_behavior: str


@dataclass(frozen=True, slots=True)
class ValidityVerdict:
    valid: bool
    category: Optional[str]
    explanation: str

    def as_dict(self) -> dict:
        return {"valid": self.valid, "category": self.category, "explanation": self.explanation}


def _normalize_title(title: str) -> str:
    return " ".join(title.lower().split())


def similarity(report_terms: set[str], history_terms: set[str]) -> float:
    """Jaccard overlap between two token sets; 0 when both are empty."""
    if not report_terms and not history_terms:
        return 0.0
    union = report_terms | history_terms
    return len(report_terms & history_terms) / len(union)


def check_validity(
    report: BugReportModel,
    history: Sequence[HistoricalReport] = (),
    docs: Sequence[FeatureDoc] = (),
) -> ValidityVerdict:
    """Duplicate, intended-behavior, and configuration screening, in that order."""
    report_text = f"{report.title} {report.observed_behavior} {report.expected_behavior}"
    report_tokens = tokenize(report_text)
    for entry in history:
        if report.title and _normalize_title(report.title) == _normalize_title(entry.title):
            return ValidityVerdict(
                False,
                "Duplicate",
                f"title matches existing report {entry.report_id}",
            )
        overlap = similarity(report_tokens, tokenize(f"{entry.title} {entry.text}"))
        if overlap >= DUPLICATE_OVERLAP_THRESHOLD:
            return ValidityVerdict(
                False,
                "Duplicate",
                f"token overlap {overlap:.2f} with report {entry.report_id}",
            )

    observed = " ".join(report.observed_behavior.lower().split())
    for doc in docs:
        intended = " ".join(doc.intended_behavior.lower().split())
        if intended and observed and (intended in observed or observed in intended):
            return ValidityVerdict(
                False,
                "UserError",
                f"observed behavior matches the documented behavior of {doc.feature}",
            )

    signal_tokens = tokenize(
        f"{report.observed_behavior} {' '.join(report.steps_to_reproduce)}"
    )
    if signal_tokens & _CONFIG_TOKENS:
        return ValidityVerdict(
            False,
            "ConfigurationError",
            "report points at configuration rather than product code",
        )

    return ValidityVerdict(
        True, None, "no duplicate, documentation, or configuration signal matched"
    )


# ---------------------------------------------------------------------------
# Assignment

@dataclass(frozen=True, slots=True)
class Candidate:
    developer_id: str
    history_terms: frozenset[str]
    open_workload: int


@dataclass(frozen=True, slots=True)
class AssignmentWeights:
    w_sim: float = 1.0
    w_load: float = 1.0

    def __post_init__(self) -> None:
        if self.w_sim < 0 or self.w_load < 0:
            raise ValueError("assignment weights must be non-negative")


@dataclass(frozen=True, slots=True)
class RankedCandidate:
    developer_id: str
    score: float

    def as_dict(self) -> dict:
        return {"developer": self.developer_id, "score": self.score}


def recommend_assignee(
    report_terms: set[str],
    candidates: Sequence[Candidate],
    weights: AssignmentWeights = AssignmentWeights(),
) -> list[RankedCandidate]:
    """Rank developers by report similarity and inverse workload.

    The full ranking is returned so a reviewing lead can override with any
    candidate; ties break on the developer id.
    """
    if not candidates:
        raise NoCandidates("no developers available for assignment")
    max_workload = max(c.open_workload for c in candidates)
    scored = []
    for candidate in candidates:
        load_factor = 1.0 - (candidate.open_workload / max_workload if max_workload else 0.0)
        score = (
            weights.w_sim * similarity(report_terms, set(candidate.history_terms))
            + weights.w_load * load_factor
        )
        scored.append(RankedCandidate(candidate.developer_id, score))
    return sorted(scored, key=lambda r: (-r.score, r.developer_id))


# ---------------------------------------------------------------------------
# Reference agents

ARTIFACT_BY_STAGE: dict[Stage, str] = {
    Stage.REPORT_DIALOGUE: "OriginalReport",
    Stage.ENHANCEMENT: "EnhancedReport",
    Stage.AGENT_REPRODUCTION: "ReproductionArtifact",
    Stage.CLASSIFICATION: "ClassificationRecord",
    Stage.FEATURE_TRACING: "TraceLink",
    Stage.VALIDITY_CHECK: "ValidityVerdict",
    Stage.NO_CODE_FIX: "NoCodeFixProposal",
    Stage.PATCH_GENERATION: "PatchCandidate",
    Stage.AGENT_VERIFICATION: "VerificationResult",
    Stage.DEPLOYMENT: "DeploymentReport",
}

# Outcomes that come with a work product worth storing.
_PRODUCING_OUTCOMES: dict[Stage, frozenset[str]] = {
    Stage.REPORT_DIALOGUE: frozenset({kernel.SUFFICIENT}),
    Stage.ENHANCEMENT: frozenset({kernel.ENHANCED}),
    Stage.AGENT_REPRODUCTION: frozenset({kernel.SUCCESS}),
    Stage.CLASSIFICATION: frozenset({kernel.DONE}),
    Stage.FEATURE_TRACING: frozenset({kernel.DONE}),
    Stage.VALIDITY_CHECK: frozenset({kernel.VALID, kernel.INVALID}),
    Stage.NO_CODE_FIX: frozenset({kernel.PROPOSED_FIX}),
    Stage.PATCH_GENERATION: frozenset({kernel.GENERATED}),
    Stage.AGENT_VERIFICATION: frozenset({kernel.PASS, kernel.FAIL}),
    Stage.DEPLOYMENT: frozenset({kernel.DEPLOYED}),
}


def _json_bytes(payload: dict) -> bytes:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")


class Agent:
    """Base: a deterministic handler for one agent kind."""

    kind: AgentKind

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        raise NotImplementedError


class ChatbotIntakeAgent(Agent):
    """Guides the reporter, one follow-up per missing required field."""

    kind = AgentKind.CHATBOT_INTAKE

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        transcript = [
            DialogueTurn(**turn) for turn in invocation.context.get("transcript", [])
        ]
        report = BugReportModel.from_dict(invocation.context.get("report", {}))
        prompt = next_prompt(transcript, report)
        if isinstance(prompt, FollowUp):
            return AgentResponse(
                StageOutcome(
                    kernel.NEEDS_MORE_INFO,
                    {"target_field": prompt.target_field, "question": prompt.question},
                ),
                rationale=f"missing {prompt.target_field}",
            )
        compiled = merge_transcript(report, transcript)
        return AgentResponse(
            StageOutcome(kernel.SUFFICIENT, {"report": compiled.as_dict()}),
            produced_artifacts=[("OriginalReport", _json_bytes(compiled.as_dict()))],
            rationale="all required report fields are populated",
        )


class EnhancerAgent(Agent):
    kind = AgentKind.ENHANCER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        original = invocation.latest_json("OriginalReport") or {}
        transcript = [
            DialogueTurn(**turn)
            for turn in (invocation.latest_json("DialogueTranscript") or {"turns": []})["turns"]
        ]
        enhanced, rationale = enhance(BugReportModel.from_dict(original), transcript)
        return AgentResponse(
            StageOutcome(kernel.ENHANCED, {"completeness": assess_quality(enhanced).completeness}),
            produced_artifacts=[("EnhancedReport", _json_bytes(enhanced.as_dict()))],
            rationale=rationale,
        )


class ReproducerAgent(Agent):
    """Reference reproducer: replays the enhanced steps and succeeds."""

    kind = AgentKind.REPRODUCER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        report = invocation.latest_json("EnhancedReport") or {}
        script = report.get("steps_to_reproduce", [])
        artifact = {"replayed_steps": script, "result": "reproduced"}
        return AgentResponse(
            StageOutcome(kernel.SUCCESS, {"attempt": invocation.context.get("attempt", 1)}),
            produced_artifacts=[("ReproductionArtifact", _json_bytes(artifact))],
            rationale="replayed the documented steps in a clean sandbox",
        )


class ClassifierAgent(Agent):
    kind = AgentKind.CLASSIFIER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        report = BugReportModel.from_dict(invocation.latest_json("EnhancedReport") or {})
        record = classify(report)
        return AgentResponse(
            StageOutcome(kernel.DONE, record.as_dict()),
            produced_artifacts=[("ClassificationRecord", _json_bytes(record.as_dict()))],
            rationale=f"matched keyword rules for type {record.bug_type}",
        )


class FeatureTracerAgent(Agent):
    """Links the bug to the feature whose documentation it overlaps most."""

    kind = AgentKind.FEATURE_TRACER

    def __init__(self, docs: Sequence[FeatureDoc] = ()) -> None:
        self.docs = list(docs)

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        report = BugReportModel.from_dict(invocation.latest_json("EnhancedReport") or {})
        report_tokens = tokenize(
            f"{report.title} {report.observed_behavior} {report.expected_behavior}"
        )
        feature, best = "general", 0.0
        for doc in self.docs:
            score = similarity(report_tokens, tokenize(f"{doc.feature} {doc.intended_behavior}"))
            if score > best:
                feature, best = doc.feature, score
        link = {"feature": feature, "confidence": round(best, 4)}
        return AgentResponse(
            StageOutcome(kernel.DONE, link),
            produced_artifacts=[("TraceLink", _json_bytes(link))],
            rationale=f"best documentation overlap: {feature}",
        )


class ValidityCheckerAgent(Agent):
    kind = AgentKind.VALIDITY_CHECKER

    def __init__(
        self, history: Sequence[HistoricalReport] = (), docs: Sequence[FeatureDoc] = ()
    ) -> None:
        self.history = list(history)
        self.docs = list(docs)

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        report = BugReportModel.from_dict(invocation.latest_json("EnhancedReport") or {})
        verdict = check_validity(report, self.history, self.docs)
        kind = kernel.VALID if verdict.valid else kernel.INVALID
        payload = {"category": verdict.category, "explanation": verdict.explanation}
        return AgentResponse(
            StageOutcome(kind, payload),
            produced_artifacts=[("ValidityVerdict", _json_bytes(verdict.as_dict()))],
            rationale=verdict.explanation,
        )


class AssignerAgent(Agent):
    kind = AgentKind.ASSIGNER

    def __init__(
        self,
        candidates: Sequence[Candidate],
        weights: AssignmentWeights = AssignmentWeights(),
    ) -> None:
        self.candidates = list(candidates)
        self.weights = weights

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        excluded = set(invocation.context.get("excluded_developers", []))
        pool = [c for c in self.candidates if c.developer_id not in excluded]
        report = BugReportModel.from_dict(invocation.latest_json("EnhancedReport") or {})
        terms = tokenize(
            f"{report.title} {report.observed_behavior} {report.expected_behavior}"
        )
        ranking = recommend_assignee(terms, pool, self.weights)
        return AgentResponse(
            StageOutcome(
                kernel.RECOMMENDED,
                {"ranking": [r.as_dict() for r in ranking], "excluded": sorted(excluded)},
            ),
            rationale=f"ranked {len(ranking)} candidates by similarity and workload",
        )


class NoCodeFixerAgent(Agent):
    kind = AgentKind.NOCODE_FIXER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        verdict = invocation.latest_json("ValidityVerdict") or {}
        category = verdict.get("category") or "UserError"
        adjustments = {
            "UserError": "clarify the documented behavior and point the user at the guide",
            "Duplicate": "link the duplicate to the original report and close it",
            "ConfigurationError": "correct the reported configuration value and re-test",
        }
        proposal = {
            "category": category,
            "adjustment": adjustments.get(category, adjustments["UserError"]),
            "round": invocation.context.get("attempt", 1),
        }
        return AgentResponse(
            StageOutcome(kernel.PROPOSED_FIX, proposal),
            produced_artifacts=[("NoCodeFixProposal", _json_bytes(proposal))],
            rationale=f"no-code adjustment targeting {category}",
        )


class LocalizerAgent(Agent):
    kind = AgentKind.LOCALIZER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        trace = invocation.latest_json("TraceLink") or {"feature": "general"}
        locations = [f"src/{trace['feature']}/handler.py", f"src/{trace['feature']}/model.py"]
        return AgentResponse(
            StageOutcome(kernel.DONE, {"suspect_locations": locations}),
            rationale="narrowed the search space from the trace link",
        )


class PatchGeneratorAgent(Agent):
    """Emits several candidate patches per round (default three)."""

    kind = AgentKind.PATCH_GENERATOR

    def __init__(self, candidates_per_round: int = 3) -> None:
        self.candidates_per_round = candidates_per_round

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        trace = invocation.latest_json("TraceLink") or {"feature": "general"}
        produced = []
        for index in range(1, self.candidates_per_round + 1):
            diff = (
                f"--- a/src/{trace['feature']}/handler.py\n"
                f"+++ b/src/{trace['feature']}/handler.py\n"
                f"@@ candidate {index} @@\n"
                f"-    raise RegressionError\n"
                f"+    return recover()  # variant {index}\n"
            )
            produced.append(("PatchCandidate", diff.encode("utf-8")))
        return AgentResponse(
            StageOutcome(kernel.GENERATED, {"candidate_count": len(produced)}),
            produced_artifacts=produced,
            rationale=f"generated {len(produced)} candidate patches",
        )


class VerifierAgent(Agent):
    kind = AgentKind.VERIFIER

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        result = {"regression_suite": "green", "new_failures": 0}
        return AgentResponse(
            StageOutcome(kernel.PASS, result),
            produced_artifacts=[("VerificationResult", _json_bytes(result))],
            rationale="regression tests executed automatically; no new failures",
        )


class DeploymentAssistantAgent(Agent):
    """Deployment is stubbed: the assistant only writes the report."""

    kind = AgentKind.DEPLOYMENT_ASSISTANT

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        report = {
            "summary": "patch promoted through the staging pipeline",
            "case_id": invocation.case_id,
            "rollout": "canary-then-full",
        }
        return AgentResponse(
            StageOutcome(kernel.DEPLOYED, report),
            produced_artifacts=[("DeploymentReport", _json_bytes(report))],
            rationale="prepared descriptors and monitored the rollout",
        )


class ScriptedAgent(Agent):
    """Replays a fixed outcome sequence; position advances per case.

    Entries are outcome kinds or ``(kind, payload)`` pairs. Outcomes that
    carry a work product fabricate the stage's artifact kind.
    """

    def __init__(self, kind: AgentKind, script: Sequence, loop_last: bool = False) -> None:
        self.kind = kind
        self.script = list(script)
        self.loop_last = loop_last
        self._positions: dict[str, int] = {}

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        position = self._positions.get(invocation.case_id, 0)
        if position >= len(self.script):
            if not self.loop_last or not self.script:
                raise ScriptExhausted(
                    f"{self.kind.value} script exhausted after {position} calls"
                )
            position = len(self.script) - 1
        entry = self.script[position]
        self._positions[invocation.case_id] = position + 1
        if isinstance(entry, tuple):
            kind, payload = entry
        else:
            kind, payload = entry, {}
        outcome = StageOutcome(kind, dict(payload))
        produced: list[tuple[str, bytes]] = []
        artifact_kind = ARTIFACT_BY_STAGE.get(invocation.stage)
        if artifact_kind and kind in _PRODUCING_OUTCOMES.get(invocation.stage, frozenset()):
            if invocation.stage is Stage.PATCH_GENERATION:
                produced = [
                    (artifact_kind, _json_bytes({"candidate": i, "scripted": True}))
                    for i in range(1, 4)
                ]
            else:
                produced = [
                    (artifact_kind, _json_bytes({"scripted": True, "outcome": kind}))
                ]
        return AgentResponse(outcome, produced, rationale=f"scripted outcome {kind}")


class RemoteAgent(Agent):
    """HTTP adapter speaking the JSON wire schema of real LLM backends.

    Request: ``{case_id, stage, agent_kind, artifacts, thresholds}``;
    response: ``{outcome: {kind, payload}, produced_artifacts, rationale}``.
    Timeouts and non-2xx statuses raise ``AgentUnavailable`` without
    emitting any stage outcome.
    """

    def __init__(
        self,
        kind: AgentKind,
        endpoint: str,
        timeout: float = 30.0,
        transport: Optional[Callable[[str, bytes, float], tuple[int, bytes]]] = None,
    ) -> None:
        self.kind = kind
        self.endpoint = endpoint
        self.timeout = timeout
        self._transport = transport or _httpx_transport

    def handle(self, invocation: AgentInvocation) -> AgentResponse:
        request = {
            "case_id": invocation.case_id,
            "stage": invocation.stage.value,
            "agent_kind": self.kind.value,
            "artifacts": [
                {
                    "kind": item["kind"],
                    "version": item["version"],
                    "content": (
                        item["content"].decode("utf-8", "replace")
                        if isinstance(item["content"], bytes)
                        else item["content"]
                    ),
                }
                for item in invocation.artifacts
            ],
            "thresholds": invocation.thresholds.as_dict(),
        }
        body = json.dumps(request, ensure_ascii=False).encode("utf-8")
        try:
            status, payload = self._transport(self.endpoint, body, self.timeout)
        except AgentUnavailable:
            raise
        except Exception as exc:  # noqa: BLE001 - transport errors collapse here
            raise AgentUnavailable(f"{self.kind.value} endpoint unreachable: {exc}") from exc
        if not 200 <= status < 300:
            raise AgentUnavailable(f"{self.kind.value} endpoint returned {status}")
        try:
            data = json.loads(payload.decode("utf-8"))
            outcome = data["outcome"]
            response = AgentResponse(
                StageOutcome(str(outcome["kind"]), dict(outcome.get("payload", {}))),
                [
                    (str(item["kind"]), str(item["content"]).encode("utf-8"))
                    for item in data.get("produced_artifacts", [])
                ],
                rationale=str(data.get("rationale", "")),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"{self.kind.value} wire schema violation: {exc}") from exc
        return response


def _httpx_transport(url: str, body: bytes, timeout: float) -> tuple[int, bytes]:
    import httpx

    try:
        result = httpx.post(
            url, content=body, timeout=timeout, headers={"content-type": "application/json"}
        )
    except httpx.HTTPError as exc:
        raise AgentUnavailable(f"transport failure: {exc}") from exc
    return result.status_code, result.content


def invoke(
    descriptor: AgentDescriptor, agent: Agent, invocation: AgentInvocation
) -> AgentResponse:
    """Run one agent under the uniform contract and validate its outcome."""
    if agent.kind is not descriptor.kind:
        raise MalformedResponse(
            f"descriptor {descriptor.name} is {descriptor.kind.value}, "
            f"agent serves {agent.kind.value}"
        )
    response = agent.handle(invocation)
    legal = kernel.legal_outcomes(invocation.stage)
    if response.outcome.kind not in legal:
        raise MalformedResponse(
            f"{descriptor.kind.value} returned {response.outcome.kind!r}, "
            f"legal at {invocation.stage.value}: {sorted(legal)}"
        )
    return response


def default_agents(
    history: Sequence[HistoricalReport] = (),
    docs: Sequence[FeatureDoc] = (),
    candidates: Sequence[Candidate] = (),
    weights: AssignmentWeights = AssignmentWeights(),
) -> dict[AgentKind, Agent]:
    """The full reference crew, one agent per kind."""
    return {
        AgentKind.CHATBOT_INTAKE: ChatbotIntakeAgent(),
        AgentKind.ENHANCER: EnhancerAgent(),
        AgentKind.REPRODUCER: ReproducerAgent(),
        AgentKind.CLASSIFIER: ClassifierAgent(),
        AgentKind.FEATURE_TRACER: FeatureTracerAgent(docs),
        AgentKind.VALIDITY_CHECKER: ValidityCheckerAgent(history, docs),
        AgentKind.ASSIGNER: AssignerAgent(candidates, weights),
        AgentKind.NOCODE_FIXER: NoCodeFixerAgent(),
        AgentKind.LOCALIZER: LocalizerAgent(),
        AgentKind.PATCH_GENERATOR: PatchGeneratorAgent(),
        AgentKind.VERIFIER: VerifierAgent(),
        AgentKind.DEPLOYMENT_ASSISTANT: DeploymentAssistantAgent(),
    }
