"""Tests for the artifact store, registry, policy, and provenance."""

from __future__ import annotations

import base64
import json

import pytest

from buglife.agents import AgentDescriptor, AgentKind
from buglife.broker import (
    ContextBroker,
    HumanActor,
    NotFound,
    PolicyDenied,
    StaleVersion,
    UnknownCase,
)

ENHANCER = AgentDescriptor("ref-enhancer", AgentKind.ENHANCER, 1)
LOCALIZER = AgentDescriptor("ref-localizer", AgentKind.LOCALIZER, 1)
CHATBOT = AgentDescriptor("ref-chatbot", AgentKind.CHATBOT_INTAKE, 1)
CS_REP = HumanActor("cs-1", "customer_support")


@pytest.fixture
def broker() -> ContextBroker:
    b = ContextBroker()
    b.open_case("case-1")
    return b


class TestRegistry:
    def test_first_registration_becomes_active(self, broker):
        receipt = broker.register_agent(ENHANCER)
        assert receipt.active
        assert broker.active_agent(AgentKind.ENHANCER) == ENHANCER

    def test_higher_version_supersedes_and_old_is_retained(self, broker):
        broker.register_agent(ENHANCER)
        v2 = AgentDescriptor("ref-enhancer", AgentKind.ENHANCER, 2)
        broker.register_agent(v2)
        assert broker.active_agent(AgentKind.ENHANCER) == v2
        assert ENHANCER in broker.registered_descriptors()

    def test_stale_version_rejected(self, broker):
        broker.register_agent(AgentDescriptor("ref-enhancer", AgentKind.ENHANCER, 2))
        with pytest.raises(StaleVersion):
            broker.register_agent(ENHANCER)


class TestPutGet:
    def test_first_write_is_version_one(self, broker):
        record = broker.put_artifact("case-1", "EnhancedReport", b"{}", ENHANCER)
        assert record.version == 1
        assert record.artifact_id == "case-1/EnhancedReport/v1"
        assert record.content_hash == __import__("hashlib").sha256(b"{}").hexdigest()

    def test_second_write_appends_and_preserves_v1(self, broker):
        broker.put_artifact("case-1", "EnhancedReport", b"first", ENHANCER)
        broker.put_artifact("case-1", "EnhancedReport", b"second", ENHANCER)
        v1 = broker.get_artifact("case-1", "EnhancedReport", CS_REP, version=1)
        latest = broker.get_artifact("case-1", "EnhancedReport", CS_REP)
        assert v1.content == b"first"
        assert latest.version == 2 and latest.content == b"second"

    def test_denied_write_raises_and_is_logged(self, broker):
        with pytest.raises(PolicyDenied):
            broker.put_artifact("case-1", "OriginalReport", b"x", LOCALIZER)
        entries = broker.provenance("case-1")
        assert entries[-1].access == "denied"
        assert entries[-1].artifact_id == "OriginalReport"

    def test_denied_read(self, broker):
        broker.put_artifact("case-1", "OriginalReport", b"r", CHATBOT)
        patcher = AgentDescriptor("ref-patcher", AgentKind.PATCH_GENERATOR, 1)
        with pytest.raises(PolicyDenied):
            broker.get_artifact("case-1", "OriginalReport", patcher)

    def test_chatbot_cannot_read_patches(self, broker):
        dev = HumanActor("dev-1", "developer")
        broker.put_artifact("case-1", "PatchCandidate", b"diff", dev)
        with pytest.raises(PolicyDenied):
            broker.get_artifact("case-1", "PatchCandidate", CHATBOT)

    def test_unknown_case(self, broker):
        with pytest.raises(UnknownCase):
            broker.put_artifact("nope", "EnhancedReport", b"", ENHANCER)

    def test_missing_artifact(self, broker):
        with pytest.raises(NotFound):
            broker.get_artifact("case-1", "EnhancedReport", CS_REP)

    def test_records_are_immutable_and_rereads_are_identical(self, broker):
        broker.put_artifact("case-1", "EnhancedReport", b"stable", ENHANCER)
        first = broker.get_artifact("case-1", "EnhancedReport", CS_REP)
        second = broker.get_artifact("case-1", "EnhancedReport", CS_REP)
        assert first.content == second.content == b"stable"
        assert first.content_hash == second.content_hash


class TestProvenance:
    def test_fresh_case_is_empty(self, broker):
        assert broker.provenance("case-1") == []

    def test_put_then_get_yields_two_ordered_entries(self, broker):
        broker.put_artifact("case-1", "EnhancedReport", b"{}", ENHANCER)
        broker.get_artifact("case-1", "EnhancedReport", CS_REP)
        entries = broker.provenance("case-1")
        assert [e.access for e in entries] == ["write", "read"]
        assert [e.seq for e in entries] == [1, 2]

    def test_audit_completeness(self, broker):
        broker.put_artifact("case-1", "EnhancedReport", b"{}", ENHANCER)  # write
        broker.get_artifact("case-1", "EnhancedReport", CS_REP)  # read
        with pytest.raises(PolicyDenied):
            broker.put_artifact("case-1", "OriginalReport", b"", LOCALIZER)  # denied
        entries = broker.provenance("case-1")
        assert len(entries) == 3
        assert {e.access for e in entries} == {"write", "read", "denied"}
        assert [e.seq for e in entries] == [1, 2, 3]

    def test_unknown_case(self, broker):
        with pytest.raises(UnknownCase):
            broker.provenance("nope")


class TestExport:
    def test_jsonl_ordered_by_kind_and_version(self, broker):
        broker.put_artifact("case-1", "OriginalReport", b"report", CHATBOT)
        broker.put_artifact("case-1", "EnhancedReport", b"e1", ENHANCER)
        broker.put_artifact("case-1", "EnhancedReport", b"e2", ENHANCER)
        lines = broker.export_case("case-1").decode().splitlines()
        rows = [json.loads(line) for line in lines]
        assert [(r["kind"], r["version"]) for r in rows] == [
            ("EnhancedReport", 1),
            ("EnhancedReport", 2),
            ("OriginalReport", 1),
        ]
        assert base64.b64decode(rows[2]["content_base64"]) == b"report"
        assert set(rows[0]) == {
            "artifact_id", "case_id", "kind", "version", "producer",
            "content_base64", "content_hash", "created_at",
        }


class TestReadableSlice:
    def test_slice_is_policy_filtered_and_audited(self, broker):
        broker.put_artifact("case-1", "OriginalReport", b"r", CHATBOT)
        dev = HumanActor("dev-1", "developer")
        broker.put_artifact("case-1", "PatchCandidate", b"diff", dev)
        slice_ = broker.readable_slice("case-1", ENHANCER)
        kinds = {item["kind"] for item in slice_}
        assert "OriginalReport" in kinds
        assert "PatchCandidate" not in kinds
        reads = [e for e in broker.provenance("case-1") if e.access == "read"]
        assert len(reads) == len(slice_)
