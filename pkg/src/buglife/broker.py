"""Central coordination point: artifact store, agent registry, access policy.

The broker owns every work product the pipeline creates. Artifact records
are immutable and versioned per (case, kind); content is opaque bytes with
a sha-256 digest so replays can check bit-exactness. Every read, write, and
denied access appends a provenance entry — there is no silent access path.
The agent registry tracks (name, kind, version) triples; registering keeps
superseded versions for provenance.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional, Sequence, Union

from .agents import AgentDescriptor, AgentKind

ARTIFACT_KINDS = (
    "DialogueTranscript",
    "OriginalReport",
    "EnhancedReport",
    "ReproductionArtifact",
    "ClassificationRecord",
    "TraceLink",
    "ValidityVerdict",
    "NoCodeFixProposal",
    "PatchCandidate",
    "VerificationResult",
    "DeploymentReport",
)

ALL_KINDS = frozenset(ARTIFACT_KINDS)


class BrokerError(Exception):
    pass


class StaleVersion(BrokerError):
    """Registration with a version not above the current one."""


class PolicyDenied(BrokerError):
    """Access outside the policy grants; also logged to provenance."""


class UnknownCase(BrokerError):
    pass


class NotFound(BrokerError):
    pass


@dataclass(frozen=True, slots=True)
class HumanActor:
    actor_id: str
    role: str

    def as_dict(self) -> dict:
        return {"actor_id": self.actor_id, "role": self.role}


Producer = Union[AgentDescriptor, HumanActor]


def producer_dict(producer: Producer) -> dict:
    if isinstance(producer, AgentDescriptor):
        return {"type": "agent", **producer.as_dict()}
    return {"type": "human", **producer.as_dict()}


def producer_label(producer: Producer) -> str:
    if isinstance(producer, AgentDescriptor):
        return f"agent:{producer.kind.value}/{producer.name}@v{producer.version}"
    return f"{producer.role}:{producer.actor_id}"


@dataclass(frozen=True, slots=True)
class ArtifactRecord:
    artifact_id: str
    case_id: str
    kind: str
    version: int
    producer: dict
    content: bytes
    content_hash: str
    created_at: str

    def export_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "case_id": self.case_id,
            "kind": self.kind,
            "version": self.version,
            "producer": self.producer,
            "content_base64": base64.b64encode(self.content).decode("ascii"),
            "content_hash": self.content_hash,
            "created_at": self.created_at,
        }


@dataclass(frozen=True, slots=True)
class ProvenanceEntry:
    seq: int
    case_id: str
    actor: str
    artifact_id: str
    access: str  # "read" | "write" | "denied"
    timestamp: str

    def as_dict(self) -> dict:
        return {
            "seq": self.seq,
            "case_id": self.case_id,
            "actor": self.actor,
            "artifact_id": self.artifact_id,
            "access": self.access,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True, slots=True)
class RegistrationReceipt:
    name: str
    kind: AgentKind
    version: int
    active: bool


def _grants(*kinds: str) -> frozenset[str]:
    unknown = set(kinds) - ALL_KINDS
    if unknown:
        raise ValueError(f"unknown artifact kinds {unknown}")
    return frozenset(kinds)


@dataclass(frozen=True)
class AccessPolicy:
    """Read/write grants per agent kind and per human role; default deny.

    Agents see their stage's inputs and write only their stage's output.
    Humans with case responsibilities may read everything (the service
    scopes which cases they can touch) and write only the artifact kinds
    their role produces by hand.
    """

    agent_reads: dict[AgentKind, frozenset[str]]
    agent_writes: dict[AgentKind, frozenset[str]]
    role_reads: dict[str, frozenset[str]]
    role_writes: dict[str, frozenset[str]]

    def may(self, actor: Producer, kind: str, access: str) -> bool:
        if isinstance(actor, AgentDescriptor):
            table = self.agent_writes if access == "write" else self.agent_reads
            return kind in table.get(actor.kind, frozenset())
        table = self.role_writes if access == "write" else self.role_reads
        return kind in table.get(actor.role, frozenset())

    def readable_kinds(self, actor: Producer) -> frozenset[str]:
        if isinstance(actor, AgentDescriptor):
            return self.agent_reads.get(actor.kind, frozenset())
        return self.role_reads.get(actor.role, frozenset())


def default_policy() -> AccessPolicy:
    agent_reads = {
        AgentKind.CHATBOT_INTAKE: _grants("DialogueTranscript", "OriginalReport"),
        AgentKind.ENHANCER: _grants("OriginalReport", "DialogueTranscript", "EnhancedReport"),
        AgentKind.REPRODUCER: _grants("OriginalReport", "EnhancedReport"),
        AgentKind.CLASSIFIER: _grants("EnhancedReport"),
        AgentKind.FEATURE_TRACER: _grants("EnhancedReport", "ClassificationRecord"),
        AgentKind.VALIDITY_CHECKER: _grants(
            "OriginalReport", "EnhancedReport", "ClassificationRecord", "TraceLink"
        ),
        AgentKind.ASSIGNER: _grants(
            "EnhancedReport", "ClassificationRecord", "TraceLink", "ValidityVerdict"
        ),
        AgentKind.NOCODE_FIXER: _grants("OriginalReport", "EnhancedReport", "ValidityVerdict"),
        AgentKind.LOCALIZER: _grants(
            "EnhancedReport", "ReproductionArtifact", "TraceLink", "VerificationResult"
        ),
        AgentKind.PATCH_GENERATOR: _grants(
            "EnhancedReport", "ReproductionArtifact", "TraceLink"
        ),
        AgentKind.VERIFIER: _grants(
            "EnhancedReport", "ReproductionArtifact", "PatchCandidate", "NoCodeFixProposal"
        ),
        AgentKind.DEPLOYMENT_ASSISTANT: _grants("PatchCandidate", "VerificationResult"),
    }
    agent_writes = {
        AgentKind.CHATBOT_INTAKE: _grants("DialogueTranscript", "OriginalReport"),
        AgentKind.ENHANCER: _grants("EnhancedReport"),
        AgentKind.REPRODUCER: _grants("ReproductionArtifact"),
        AgentKind.CLASSIFIER: _grants("ClassificationRecord"),
        AgentKind.FEATURE_TRACER: _grants("TraceLink"),
        AgentKind.VALIDITY_CHECKER: _grants("ValidityVerdict"),
        AgentKind.ASSIGNER: frozenset(),
        AgentKind.NOCODE_FIXER: _grants("NoCodeFixProposal"),
        AgentKind.LOCALIZER: frozenset(),
        AgentKind.PATCH_GENERATOR: _grants("PatchCandidate"),
        AgentKind.VERIFIER: _grants("VerificationResult"),
        AgentKind.DEPLOYMENT_ASSISTANT: _grants("DeploymentReport"),
    }
    role_reads = {
        "end_user": _grants(
            "DialogueTranscript", "OriginalReport", "EnhancedReport",
            "NoCodeFixProposal", "DeploymentReport", "ValidityVerdict",
        ),
        "customer_support": ALL_KINDS,
        "project_manager": ALL_KINDS,
        "team_lead": ALL_KINDS,
        "developer": ALL_KINDS,
        "reviewer": ALL_KINDS,
        "tester": ALL_KINDS,
        "ops": ALL_KINDS,
    }
    role_writes = {
        "end_user": _grants("DialogueTranscript"),
        "customer_support": _grants("ReproductionArtifact", "NoCodeFixProposal"),
        "developer": _grants("PatchCandidate"),
        "tester": _grants("VerificationResult"),
        "ops": _grants("DeploymentReport"),
    }
    return AccessPolicy(agent_reads, agent_writes, role_reads, role_writes)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class ContextBroker:
    """Versioned artifact store with registry, policy, and audit trail."""

    def __init__(
        self,
        policy: Optional[AccessPolicy] = None,
        clock: Optional[Callable[[], str]] = None,
    ) -> None:
        self.policy = policy or default_policy()
        self._clock = clock or utc_now
        self._registry: dict[tuple[str, AgentKind], int] = {}
        self._descriptors: list[AgentDescriptor] = []
        self._active: dict[AgentKind, AgentDescriptor] = {}
        self._artifacts: dict[str, dict[str, list[ArtifactRecord]]] = {}
        self._provenance: dict[str, list[ProvenanceEntry]] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    # -- cases --------------------------------------------------------------

    def open_case(self, case_id: str) -> None:
        with self._registry_lock:
            if case_id not in self._artifacts:
                self._artifacts[case_id] = {}
                self._provenance[case_id] = []
                self._locks[case_id] = threading.RLock()

    def _case_lock(self, case_id: str) -> threading.RLock:
        lock = self._locks.get(case_id)
        if lock is None:
            raise UnknownCase(case_id)
        return lock

    # -- registry -----------------------------------------------------------

    def register_agent(self, descriptor: AgentDescriptor) -> RegistrationReceipt:
        with self._registry_lock:
            key = (descriptor.name, descriptor.kind)
            current = self._registry.get(key)
            if current is not None and descriptor.version <= current:
                raise StaleVersion(
                    f"{descriptor.name}/{descriptor.kind.value} already at v{current}"
                )
            self._registry[key] = descriptor.version
            self._descriptors.append(descriptor)
            self._active[descriptor.kind] = descriptor
            return RegistrationReceipt(descriptor.name, descriptor.kind, descriptor.version, True)

    def active_agent(self, kind: AgentKind) -> AgentDescriptor:
        descriptor = self._active.get(kind)
        if descriptor is None:
            raise NotFound(f"no registered agent for kind {kind.value}")
        return descriptor

    def registered_descriptors(self) -> list[AgentDescriptor]:
        return list(self._descriptors)

    # -- provenance ---------------------------------------------------------

    def _log(self, case_id: str, actor: Producer, artifact_id: str, access: str) -> None:
        entries = self._provenance[case_id]
        entries.append(
            ProvenanceEntry(
                seq=len(entries) + 1,
                case_id=case_id,
                actor=producer_label(actor),
                artifact_id=artifact_id,
                access=access,
                timestamp=self._clock(),
            )
        )

    def provenance(self, case_id: str) -> list[ProvenanceEntry]:
        if case_id not in self._provenance:
            raise UnknownCase(case_id)
        with self._case_lock(case_id):
            return list(self._provenance[case_id])

    # -- artifacts ----------------------------------------------------------

    def put_artifact(
        self, case_id: str, kind: str, content: bytes, producer: Producer
    ) -> ArtifactRecord:
        if kind not in ALL_KINDS:
            raise BrokerError(f"unknown artifact kind {kind!r}")
        if case_id not in self._artifacts:
            raise UnknownCase(case_id)
        with self._case_lock(case_id):
            if not self.policy.may(producer, kind, "write"):
                self._log(case_id, producer, kind, "denied")
                raise PolicyDenied(
                    f"{producer_label(producer)} may not write {kind}"
                )
            versions = self._artifacts[case_id].setdefault(kind, [])
            version = len(versions) + 1
            record = ArtifactRecord(
                artifact_id=f"{case_id}/{kind}/v{version}",
                case_id=case_id,
                kind=kind,
                version=version,
                producer=producer_dict(producer),
                content=bytes(content),
                content_hash=hashlib.sha256(content).hexdigest(),
                created_at=self._clock(),
            )
            versions.append(record)
            self._log(case_id, producer, record.artifact_id, "write")
            return record

    def get_artifact(
        self,
        case_id: str,
        kind: str,
        requester: Producer,
        version: Optional[int] = None,
    ) -> ArtifactRecord:
        if case_id not in self._artifacts:
            raise UnknownCase(case_id)
        with self._case_lock(case_id):
            if not self.policy.may(requester, kind, "read"):
                self._log(case_id, requester, kind, "denied")
                raise PolicyDenied(f"{producer_label(requester)} may not read {kind}")
            versions = self._artifacts[case_id].get(kind, [])
            if not versions:
                raise NotFound(f"{case_id} has no {kind}")
            if version is None:
                record = versions[-1]
            else:
                if version < 1 or version > len(versions):
                    raise NotFound(f"{case_id}/{kind}/v{version}")
                record = versions[version - 1]
            self._log(case_id, requester, record.artifact_id, "read")
            return record

    def list_artifacts(self, case_id: str) -> list[ArtifactRecord]:
        """Unaudited listing for timelines and exports (no content access)."""
        if case_id not in self._artifacts:
            raise UnknownCase(case_id)
        with self._case_lock(case_id):
            records = [
                record
                for versions in self._artifacts[case_id].values()
                for record in versions
            ]
        return sorted(records, key=lambda r: (r.kind, r.version))

    def versions(self, case_id: str, kind: str) -> int:
        if case_id not in self._artifacts:
            raise UnknownCase(case_id)
        return len(self._artifacts[case_id].get(kind, []))

    def readable_slice(self, case_id: str, requester: Producer) -> list[dict]:
        """Policy-filtered latest versions handed to an agent invocation.

        Reads are audited like any other access.
        """
        slice_: list[dict] = []
        for kind in sorted(self.policy.readable_kinds(requester)):
            if self.versions(case_id, kind):
                record = self.get_artifact(case_id, kind, requester)
                slice_.append(
                    {"kind": kind, "version": record.version, "content": record.content}
                )
        return slice_

    def export_case(self, case_id: str) -> bytes:
        """JSON-lines export of every record, ordered by (kind, version)."""
        lines = [
            json.dumps(record.export_dict(), ensure_ascii=False, sort_keys=True)
            for record in self.list_artifacts(case_id)
        ]
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
