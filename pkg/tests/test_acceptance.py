"""Acceptance suite: one test per acceptance criterion, strictest settings.

Each criterion prints a single PASS line when it holds (run with ``-s`` to
see them); a failed assertion marks the criterion failed. Expected values
are frozen from independent derivations: hand-walks of the two workflow
diagrams, hand-enumerated outcome prefixes, and role-touch enumeration of
the happy paths.
"""

from __future__ import annotations

import itertools
import json
import random
import threading
import time

import pytest

from buglife import agents as ag
from buglife import kernel as k
from buglife import persistence as p
from buglife import simulator as sim
from buglife.broker import PolicyDenied
from buglife.hil import Role, SelfReview, StaleTask
from buglife.kernel import FixOrigin, Stage, StageOutcome, Thresholds, Workflow
from buglife.service import BugTracker, ServiceConfig, Session

# Frozen: hand-walk of the proposed workflow diagram, success branch.
VALID_HAPPY = [
    "ReportDialogue", "Enhancement", "AgentReproduction", "Classification",
    "FeatureTracing", "ValidityCheck", "FixDecision", "AssignmentRecommendation",
    "AssignmentReview", "Localization", "PatchGeneration", "DeveloperReview",
    "AgentVerification", "Deployment", "UserVerification", "Closed(Resolved)",
]
# Frozen: hand-walk of the invalid branch.
INVALID_HAPPY = [
    "ReportDialogue", "Enhancement", "AgentReproduction", "Classification",
    "FeatureTracing", "ValidityCheck", "NoCodeFix", "NoCodeVerification",
    "UserVerification", "Closed(InvalidResolved)",
]
# Frozen: role-touch enumeration of both happy paths.
PROPOSED_VALID_TOUCHES, PROPOSED_VALID_HANDOFFS = 4, 3
PROPOSED_INVALID_TOUCHES, PROPOSED_INVALID_HANDOFFS = 2, 1
TRADITIONAL_VALID_TOUCHES, TRADITIONAL_VALID_HANDOFFS = 13, 8
TRADITIONAL_INVALID_TOUCHES, TRADITIONAL_INVALID_HANDOFFS = 8, 2

USER = Session("user-1", frozenset({Role.END_USER}))
CS = Session("cs-1", frozenset({Role.CUSTOMER_SUPPORT}))
PM = Session("pm-1", frozenset({Role.PROJECT_MANAGER, Role.TEAM_LEAD}))
DEV = Session("dev-1", frozenset({Role.DEVELOPER}))
DEV2 = Session("dev-2", frozenset({Role.DEVELOPER, Role.REVIEWER}))
QA = Session("qa-1", frozenset({Role.TESTER}))
SESSION_FOR_ROLE = {
    Role.END_USER: USER,
    Role.CUSTOMER_SUPPORT: CS,
    Role.PROJECT_MANAGER: PM,
    Role.TEAM_LEAD: PM,
    Role.DEVELOPER: DEV,
    Role.REVIEWER: DEV2,
    Role.TESTER: QA,
}


def report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def scripted_crew(overrides=None) -> dict:
    """All-success scripted agents; per-kind scripts can be overridden."""
    scripts = {
        ag.AgentKind.CHATBOT_INTAKE: [k.SUFFICIENT],
        ag.AgentKind.ENHANCER: [k.ENHANCED],
        ag.AgentKind.REPRODUCER: [k.SUCCESS],
        ag.AgentKind.CLASSIFIER: [k.DONE],
        ag.AgentKind.FEATURE_TRACER: [k.DONE],
        ag.AgentKind.VALIDITY_CHECKER: [k.VALID],
        ag.AgentKind.ASSIGNER: [
            (k.RECOMMENDED, {"ranking": [{"developer": "dev-1", "score": 1.0}]})
        ],
        ag.AgentKind.NOCODE_FIXER: [k.PROPOSED_FIX],
        ag.AgentKind.LOCALIZER: [k.DONE],
        ag.AgentKind.PATCH_GENERATOR: [k.GENERATED],
        ag.AgentKind.VERIFIER: [k.PASS],
        ag.AgentKind.DEPLOYMENT_ASSISTANT: [k.DEPLOYED],
    }
    scripts.update(overrides or {})
    return {
        kind: ag.ScriptedAgent(kind, script, loop_last=True)
        for kind, script in scripts.items()
    }


def scripted_tracker(thresholds=Thresholds(), overrides=None) -> BugTracker:
    config = ServiceConfig.demo()
    config.thresholds = thresholds
    return BugTracker(config, agent_overrides=scripted_crew(overrides))


def submit(tracker: BugTracker) -> str:
    result = tracker.submit_report(
        USER, "the login page freezes after I click submit",
        {"os": "linux", "app_version": "2.4.1"}, "login freeze",
    )
    return result["case_id"]


def approve_all(tracker: BugTracker, case_id: str, budget: int = 40) -> None:
    """Scripted humans: every open task gets its happy-path decision."""
    for _ in range(budget):
        task = tracker.board.open_task(case_id)
        if task is None:
            return
        stage = Stage(task.payload["stage"]) if "stage" in task.payload else task.stage
        decision = k.preferred_outcome(task.stage, Workflow.PROPOSED)
        tracker.post_decision(task.task_id, SESSION_FOR_ROLE[task.role], decision)
        if k.is_terminal(tracker.store.head(case_id).stage):
            return


def stage_sequence(tracker: BugTracker, case_id: str) -> list[str]:
    records = tracker.store.events(case_id)
    transitions = [r for r in records if r.outcome["kind"] != p.CASE_OPENED]
    head = tracker.store.head(case_id)
    return [r.stage_before for r in transitions] + [head.stage_label()]


class TestHappyPathConformance:
    def test_happy_path_conformance(self):
        started = time.perf_counter()

        valid = scripted_tracker()
        valid_case = submit(valid)
        approve_all(valid, valid_case)
        valid_sequence = stage_sequence(valid, valid_case)
        assert valid_sequence == VALID_HAPPY
        assert len(valid.store.events(valid_case)) == 16  # opener + 15 transitions

        invalid = scripted_tracker(
            overrides={ag.AgentKind.VALIDITY_CHECKER: [(k.INVALID, {"category": "UserError"})]}
        )
        invalid_case = submit(invalid)
        approve_all(invalid, invalid_case)
        invalid_sequence = stage_sequence(invalid, invalid_case)
        assert invalid_sequence == INVALID_HAPPY
        assert len(invalid.store.events(invalid_case)) == 10  # opener + 9 transitions

        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"happy paths took {elapsed:.3f}s"
        report("happy-path-conformance")


class TestEscalationLaws:
    def test_reproduction_escalation_counts(self):
        tracker = scripted_tracker(overrides={ag.AgentKind.REPRODUCER: [k.FAIL]})
        case_id = submit(tracker)
        head = tracker.store.head(case_id)
        assert head.stage is Stage.MANUAL_REPRODUCTION
        events = tracker.store.events(case_id)
        fails = [e for e in events
                 if e.stage_before == "AgentReproduction" and e.outcome["kind"] == k.FAIL]
        enhancements = [e for e in events if e.stage_before == "Enhancement"]
        assert len(fails) == 3
        assert len(enhancements) == 3
        task = tracker.board.open_task(case_id)
        assert task is not None
        assert task.role is Role.CUSTOMER_SUPPORT and task.stage is Stage.MANUAL_REPRODUCTION

    def test_nocode_escalation_counts(self):
        tracker = scripted_tracker(
            overrides={ag.AgentKind.VALIDITY_CHECKER: [(k.INVALID, {"category": "UserError"})]}
        )
        case_id = submit(tracker)
        for _ in range(3):
            task = tracker.board.open_task(case_id)
            assert task.stage is Stage.NO_CODE_VERIFICATION
            tracker.post_decision(task.task_id, CS, k.FAIL)
        events = tracker.store.events(case_id)
        fails = [e for e in events
                 if e.stage_before == "NoCodeVerification" and e.outcome["kind"] == k.FAIL]
        proposals = [e for e in events if e.stage_before == "NoCodeFix"]
        assert len(fails) == 3 and len(proposals) == 3
        task = tracker.board.open_task(case_id)
        assert task.stage is Stage.MANUAL_NO_CODE_FIX and task.role is Role.CUSTOMER_SUPPORT

    def test_patch_cycle_escalation_counts(self):
        tracker = scripted_tracker()
        case_id = submit(tracker)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.FIX)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.APPROVE)
        for _ in range(3):
            task = tracker.board.open_task(case_id)
            assert task.stage is Stage.DEVELOPER_REVIEW
            tracker.post_decision(task.task_id, DEV, k.REJECT)
        events = tracker.store.events(case_id)
        rejects = [e for e in events
                   if e.stage_before == "DeveloperReview" and e.outcome["kind"] == k.REJECT]
        localizations = [e for e in events if e.stage_before == "Localization"]
        assert len(rejects) == 3 and len(localizations) == 3
        task = tracker.board.open_task(case_id)
        assert task.stage is Stage.MANUAL_FIX and task.role is Role.DEVELOPER

    def test_agent_verification_escalation_agent_patch_route(self):
        tracker = scripted_tracker(overrides={ag.AgentKind.VERIFIER: [k.FAIL]})
        case_id = submit(tracker)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.FIX)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.APPROVE)
        for _ in range(3):
            task = tracker.board.open_task(case_id)
            assert task.stage is Stage.DEVELOPER_REVIEW
            tracker.post_decision(task.task_id, DEV, k.MERGE)
        events = tracker.store.events(case_id)
        fails = [e for e in events
                 if e.stage_before == "AgentVerification" and e.outcome["kind"] == k.FAIL]
        assert len(fails) == 3
        head = tracker.store.head(case_id)
        assert head.stage is Stage.MANUAL_FIX
        assert head.fix_origin is FixOrigin.AGENT_PATCH
        task = tracker.board.open_task(case_id)
        assert task.role is Role.DEVELOPER

    def test_agent_verification_escalation_manual_patch_route(self):
        tracker = scripted_tracker(
            thresholds=Thresholds(3, 3, 1, 3),
            overrides={ag.AgentKind.VERIFIER: [k.FAIL]},
        )
        case_id = submit(tracker)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.FIX)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.APPROVE)
        # One rejection exhausts the patch cycle; the developer takes over.
        tracker.post_decision(tracker.board.open_task(case_id).task_id, DEV, k.REJECT)
        for round_ in range(3):
            task = tracker.board.open_task(case_id)
            assert task.stage is Stage.MANUAL_FIX
            tracker.post_decision(task.task_id, DEV, k.SUBMITTED)
            task = tracker.board.open_task(case_id)
            assert task.stage is Stage.REVIEWER_REVIEW
            tracker.post_decision(task.task_id, DEV2, k.APPROVE)
            if round_ < 2:
                # Below the threshold the failure returns to the developer.
                assert tracker.store.head(case_id).stage is Stage.MANUAL_FIX
        head = tracker.store.head(case_id)
        assert head.stage is Stage.MANUAL_TESTER_VERIFICATION
        assert head.fix_origin is FixOrigin.MANUAL_PATCH
        events = tracker.store.events(case_id)
        fails = [e for e in events
                 if e.stage_before == "AgentVerification" and e.outcome["kind"] == k.FAIL]
        assert len(fails) == 3
        task = tracker.board.open_task(case_id)
        assert task.role is Role.TESTER
        report("escalation-laws")


def _fixture_trackers():
    happy = scripted_tracker()
    happy_case = submit(happy)
    approve_all(happy, happy_case)

    invalid = scripted_tracker(
        overrides={ag.AgentKind.VALIDITY_CHECKER: [(k.INVALID, {"category": "UserError"})]}
    )
    invalid_case = submit(invalid)
    approve_all(invalid, invalid_case)

    escalated = scripted_tracker(overrides={ag.AgentKind.REPRODUCER: [k.FAIL]})
    escalated_case = submit(escalated)

    return [
        (happy, happy_case),
        (invalid, invalid_case),
        (escalated, escalated_case),
    ]


class TestReplayDeterminism:
    def test_replay_determinism(self):
        for tracker, case_id in _fixture_trackers():
            live = tracker.store.head(case_id)
            assert tracker.store.replay(case_id) == live

            exported = tracker.store.export_log(case_id)
            other = p.EventStore()
            other.import_log(exported)
            assert other.export_log(case_id) == exported
            assert other.replay(case_id) == live

            lines = exported.split(b"\n")[:-1]
            # One mid-line flip per record: detection must name that seq.
            for index in range(len(lines)):
                mutated_lines = [bytearray(line) for line in lines]
                target = mutated_lines[index]
                target[len(target) // 2] ^= 0x01
                blob = b"\n".join(bytes(line) for line in mutated_lines) + b"\n"
                with pytest.raises(p.CorruptChain) as err:
                    p.fold_records(p.parse_log(blob))
                assert err.value.seq == index + 1, (index, err.value.reason)
            # Dense sweep: every byte of one record.
            probe = 2
            for offset in range(len(lines[probe])):
                mutated_lines = [bytearray(line) for line in lines]
                mutated_lines[probe][offset] ^= 0x01
                blob = b"\n".join(bytes(line) for line in mutated_lines) + b"\n"
                with pytest.raises(p.CorruptChain) as err:
                    p.fold_records(p.parse_log(blob))
                assert err.value.seq == probe + 1
        report("replay-determinism")


class TestOracleAgreement:
    def test_oracle_agreement(self):
        started = time.perf_counter()
        config = sim.SimConfig(
            workflow=Workflow.PROPOSED,
            success_prob={Stage.AGENT_REPRODUCTION.value: 0.5},
            validity_mix=0.0,
            arrival_count=1,
            seed=42,
        )
        # Independent oracle: the four outcome prefixes S, FS, FFS, FFF.
        prefixes = [(1, 0.5, False), (2, 0.25, False), (3, 0.125, False), (3, 0.125, True)]
        oracle_attempts = sum(n * prob for n, prob, _ in prefixes)
        oracle_escalation = sum(prob for _, prob, esc in prefixes if esc)
        assert oracle_attempts == 1.75 and oracle_escalation == 0.125

        exact = sim.enumerate_exact(config)
        assert exact.attempts[Stage.AGENT_REPRODUCTION.value] == 1.75
        assert exact.escalation_rates[Stage.AGENT_REPRODUCTION.value] == 0.125

        metrics, _ = sim.simulate(config, replications=100_000)
        attempts = metrics.attempts[Stage.AGENT_REPRODUCTION.value]
        escalation = metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value]
        assert abs(attempts - 1.75) / 1.75 <= 0.02
        assert abs(escalation - 0.125) <= 0.005

        again, _ = sim.simulate(config, replications=100_000)
        assert again.as_dict() == metrics.as_dict()

        elapsed = time.perf_counter() - started
        assert elapsed < 30.0, f"oracle agreement took {elapsed:.1f}s"
        report("oracle-agreement")


class TestCoordinationOverheadDirection:
    def test_coordination_overhead_direction(self):
        for mix, frozen in (
            (0.0, ((TRADITIONAL_VALID_TOUCHES, TRADITIONAL_VALID_HANDOFFS),
                   (PROPOSED_VALID_TOUCHES, PROPOSED_VALID_HANDOFFS))),
            (1.0, ((TRADITIONAL_INVALID_TOUCHES, TRADITIONAL_INVALID_HANDOFFS),
                   (PROPOSED_INVALID_TOUCHES, PROPOSED_INVALID_HANDOFFS))),
        ):
            traditional = sim.SimConfig(
                workflow=Workflow.TRADITIONAL, validity_mix=mix,
                arrival_count=1, seed=17,
            )
            proposed = sim.SimConfig(
                workflow=Workflow.PROPOSED, validity_mix=mix,
                arrival_count=1, seed=17,
            )
            report_ = sim.compare(traditional, proposed, replications=4)
            (trad_touch, trad_hand), (prop_touch, prop_hand) = frozen
            assert report_["a"]["hil_touches"] == trad_touch
            assert report_["a"]["handoffs"] == trad_hand
            assert report_["b"]["hil_touches"] == prop_touch
            assert report_["b"]["handoffs"] == prop_hand
            assert report_["b"]["hil_touches"] < report_["a"]["hil_touches"]
            assert report_["b"]["handoffs"] < report_["a"]["handoffs"]
            # Simulator counts equal the exact enumeration on both sides.
            for config, touches, handoffs in (
                (traditional, trad_touch, trad_hand),
                (proposed, prop_touch, prop_hand),
            ):
                exact = sim.enumerate_exact(config)
                assert exact.hil_touches == touches
                assert exact.handoffs == handoffs
        report("coordination-overhead-direction")


class TestKernelTotalityAndSafety:
    def test_totality(self):
        thresholds = Thresholds(3, 3, 3, 3)
        for workflow in Workflow:
            table = k.rules(workflow)
            keys = {(rule.stage, rule.outcome) for rule in table}
            for stage, kind in keys:
                candidates = [r for r in table if r.stage is stage and r.outcome == kind]
                for repro, nocode, patch, verify, origin in itertools.product(
                    range(4), range(4), range(4), range(4), list(FixOrigin)
                ):
                    if stage is Stage.AGENT_VERIFICATION and origin is FixOrigin.NONE:
                        continue
                    case = k.BugCase(
                        case_id="t", report_ref="r", stage=stage, resolution=None,
                        repro_count=repro, nocode_verify_count=nocode,
                        patch_cycle_count=patch, agent_verify_count=verify,
                        fix_origin=origin, responsible_human=None,
                        restart_count=0, thresholds=thresholds,
                    )
                    admitted = [r for r in candidates if r.guard.admits(case)]
                    assert len(admitted) == 1

    def test_fuzzed_sequences(self):
        rng = random.Random(0xB17F00D)
        thresholds = Thresholds(2, 2, 2, 2)
        outcome_table = {
            workflow: {
                stage: sorted(k.legal_outcomes(stage, workflow))
                for stage in k.stages(workflow) if stage is not Stage.CLOSED
            }
            for workflow in Workflow
        }
        responsibility_stages = {
            Stage.NO_CODE_FIX, Stage.NO_CODE_VERIFICATION, Stage.MANUAL_NO_CODE_FIX,
            Stage.FIX_DECISION, Stage.ASSIGNMENT_RECOMMENDATION, Stage.ASSIGNMENT_REVIEW,
            Stage.LOCALIZATION, Stage.PATCH_GENERATION, Stage.DEVELOPER_REVIEW,
            Stage.MANUAL_FIX, Stage.REVIEWER_REVIEW, Stage.AGENT_VERIFICATION,
            Stage.MANUAL_TESTER_VERIFICATION, Stage.DEPLOYMENT, Stage.USER_VERIFICATION,
        }
        limits = {
            "repro": thresholds.repro,
            "nocode_verify": thresholds.nocode,
            "patch_cycle": thresholds.patch_cycle,
            "agent_verify": thresholds.agent_verify,
        }
        sequences = 100_000
        for index in range(sequences):
            workflow = Workflow.PROPOSED if index % 2 == 0 else Workflow.TRADITIONAL
            outcomes = outcome_table[workflow]
            case = k.init_case("fuzz", thresholds, case_id="fuzz")
            for _ in range(40):
                if k.is_terminal(case.stage):
                    break
                kinds = outcomes[case.stage]
                kind = kinds[rng.randrange(len(kinds))]
                case, _ = k.step(case, StageOutcome(kind), workflow)
                counters = case.counters()
                assert counters["repro"] <= limits["repro"]
                assert counters["nocode_verify"] <= limits["nocode_verify"]
                assert counters["patch_cycle"] <= limits["patch_cycle"]
                assert counters["agent_verify"] <= limits["agent_verify"]
                if case.stage in responsibility_stages:
                    assert case.responsible_human
        report("kernel-totality-and-safety")


class TestAssignerProperties:
    def test_assigner_properties(self):
        rng = random.Random(0xA551C)
        universe = [f"term{i}" for i in range(14)]
        trials = 10_000
        for _ in range(trials):
            terms = {t for t in universe if rng.random() < 0.5}
            candidates = [
                ag.Candidate(
                    f"dev{j}",
                    frozenset(t for t in universe if rng.random() < 0.5),
                    rng.randrange(0, 7),
                )
                for j in range(rng.randrange(2, 6))
            ]
            # Jaccard symmetry and bounds.
            sample = frozenset(t for t in universe if rng.random() < 0.5)
            score = ag.similarity(terms, set(sample))
            assert 0.0 <= score <= 1.0
            assert score == ag.similarity(set(sample), terms)
            # Argmax invariance under positive scaling with zero load weight.
            base = ag.recommend_assignee(terms, candidates, ag.AssignmentWeights(1.0, 0.0))
            scale = rng.choice((0.5, 2.0, 13.0))
            scaled = ag.recommend_assignee(
                terms, candidates, ag.AssignmentWeights(scale, 0.0)
            )
            assert scaled[0].developer_id == base[0].developer_id
            assert [r.developer_id for r in scaled] == [r.developer_id for r in base]
            # Workload monotonicity.
            target = rng.randrange(len(candidates))
            bumped = [
                ag.Candidate(c.developer_id, c.history_terms,
                             c.open_workload + rng.randrange(1, 4)
                             if i == target else c.open_workload)
                for i, c in enumerate(candidates)
            ]
            before = [r.developer_id for r in ag.recommend_assignee(terms, candidates)]
            after = [r.developer_id for r in ag.recommend_assignee(terms, bumped)]
            dev = candidates[target].developer_id
            assert after.index(dev) >= before.index(dev)
        # Deterministic lexicographic tie-break on equal scores.
        for _ in range(1_000):
            ids = [f"dev{j}" for j in range(rng.randrange(2, 6))]
            rng.shuffle(ids)
            tied = [ag.Candidate(i, frozenset({"same"}), 1) for i in ids]
            ranking = ag.recommend_assignee({"same"}, tied)
            assert [r.developer_id for r in ranking] == sorted(ids)
        report("assigner-properties")


class TestBrokerAuditCompleteness:
    def test_broker_audit_completeness(self):
        tracker = scripted_tracker(
            overrides={ag.AgentKind.REPRODUCER: [k.FAIL, k.FAIL, k.SUCCESS]}
        )
        counters = {"read": 0, "write": 0, "denied": 0}
        broker = tracker.broker
        original_get, original_put = broker.get_artifact, broker.put_artifact

        def counted_get(*args, **kwargs):
            try:
                record = original_get(*args, **kwargs)
            except PolicyDenied:
                counters["denied"] += 1
                raise
            counters["read"] += 1
            return record

        def counted_put(*args, **kwargs):
            try:
                record = original_put(*args, **kwargs)
            except PolicyDenied:
                counters["denied"] += 1
                raise
            counters["write"] += 1
            return record

        broker.get_artifact, broker.put_artifact = counted_get, counted_put

        case_id = submit(tracker)  # two reproduction failures loop twice
        original_v1 = original_get(
            case_id, "OriginalReport",
            tracker.descriptors[ag.AgentKind.VALIDITY_CHECKER], version=1,
        ).content
        counters["read"] += 0  # the probe read above is counted by counted_get? no: direct
        # account for the probe read issued through the original function
        audit_offset = 1

        approve_all(tracker, case_id)
        assert tracker.store.head(case_id).stage_label() == "Closed(Resolved)"
        # The enhancement loop produced several enhanced versions.
        assert broker.versions(case_id, "EnhancedReport") == 3

        localizer = tracker.descriptors[ag.AgentKind.LOCALIZER]
        with pytest.raises(PolicyDenied):
            broker.put_artifact(case_id, "OriginalReport", b"tamper", localizer)

        entries = tracker.broker.provenance(case_id)
        by_access = {"read": 0, "write": 0, "denied": 0}
        for entry in entries:
            by_access[entry.access] += 1
        assert by_access["read"] == counters["read"] + audit_offset
        assert by_access["write"] == counters["write"]
        assert by_access["denied"] == counters["denied"] == 1
        assert len(entries) == sum(by_access.values())
        denied = [e for e in entries if e.access == "denied"]
        assert denied[0].artifact_id == "OriginalReport"
        assert "localizer" in denied[0].actor

        after = original_get(
            case_id, "OriginalReport",
            tracker.descriptors[ag.AgentKind.VALIDITY_CHECKER], version=1,
        ).content
        assert after == original_v1
        report("broker-audit-completeness")


class TestHilIntegrity:
    def test_bijection_across_fuzzed_runs(self):
        rng = random.Random(0x5EED)
        for run in range(30):
            scripts = {
                ag.AgentKind.REPRODUCER: [k.FAIL] * rng.randrange(0, 4) + [k.SUCCESS],
                ag.AgentKind.VALIDITY_CHECKER: [
                    (k.INVALID, {"category": "UserError"})
                    if rng.random() < 0.4 else k.VALID
                ],
                ag.AgentKind.VERIFIER: [k.FAIL] * rng.randrange(0, 4) + [k.PASS],
            }
            tracker = scripted_tracker(thresholds=Thresholds(2, 2, 2, 2), overrides=scripts)
            case_id = submit(tracker)
            rejections = 0
            for _ in range(60):
                head = tracker.store.head(case_id)
                if k.is_terminal(head.stage):
                    break
                task = tracker.board.open_task(case_id)
                if task is None:
                    break
                choices = list(task.action_set)
                if task.stage is Stage.ASSIGNMENT_REVIEW:
                    if rejections >= 2 and k.REJECT in choices:
                        choices.remove(k.REJECT)
                if task.stage is Stage.USER_VERIFICATION and head.restart_count >= 1:
                    choices = [k.ACCEPT]
                decision = choices[rng.randrange(len(choices))]
                if decision == k.REJECT and task.stage is Stage.ASSIGNMENT_REVIEW:
                    rejections += 1
                payload = {}
                if decision == k.OVERRIDE:
                    payload = {"developer": f"dev-{rng.randrange(1, 4)}"}
                tracker.post_decision(
                    task.task_id, SESSION_FOR_ROLE[task.role], decision, payload
                )

            events = tracker.store.events(case_id)
            effect_seqs = [
                record.seq for record in events
                if any(e.get("effect") == "CreateHilTask" for e in record.effects)
            ]
            tasks = [tracker.board.get(tid) for tid in tracker.board._by_case[case_id]]
            assert sorted(t.source_seq for t in tasks) == sorted(effect_seqs)
            assert len({t.source_seq for t in tasks}) == len(tasks)
            open_tasks = [t for t in tasks if t.status == "Open"]
            assert len(open_tasks) <= 1
            # Every human-originated outcome traces to exactly one decided task.
            human_events = [
                (r.stage_before, r.outcome["kind"], r.actor["actor_id"])
                for r in events if r.actor.get("type") == "human"
                and r.outcome["kind"] != p.CASE_OPENED
            ]
            decided = [
                (t.stage.value, t.decision, t.decided_by)
                for t in tasks if t.status == "Decided"
            ]
            assert sorted(human_events) == sorted(decided)

    def test_recovered_drive_never_duplicates_tasks(self):
        tracker = scripted_tracker()
        case_id = submit(tracker)
        before = len(tracker.board._by_case[case_id])
        tracker.drive(case_id)
        tracker.drive(case_id)
        assert len(tracker.board._by_case[case_id]) == before

    def test_self_review_rejected(self):
        tracker = scripted_tracker(thresholds=Thresholds(3, 3, 1, 3))
        case_id = submit(tracker)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.FIX)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, PM, k.APPROVE)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, DEV, k.REJECT)
        tracker.post_decision(tracker.board.open_task(case_id).task_id, DEV, k.SUBMITTED)
        review = tracker.board.open_task(case_id)
        assert review.stage is Stage.REVIEWER_REVIEW
        author_as_reviewer = Session("dev-1", frozenset({Role.DEVELOPER, Role.REVIEWER}))
        with pytest.raises(SelfReview):
            tracker.post_decision(review.task_id, author_as_reviewer, k.APPROVE)
        tracker.post_decision(review.task_id, DEV2, k.APPROVE)
        # A distinct reviewer approves; the pump verifies and deploys.
        assert tracker.store.head(case_id).stage is Stage.USER_VERIFICATION

    def test_racing_decisions_one_success_one_stale(self):
        tracker = scripted_tracker()
        case_id = submit(tracker)
        task = tracker.board.open_task(case_id)
        results = []
        barrier = threading.Barrier(2)

        def worker(decision):
            barrier.wait()
            try:
                tracker.post_decision(task.task_id, PM, decision)
                results.append("ok")
            except StaleTask:
                results.append("stale")

        threads = [threading.Thread(target=worker, args=(d,)) for d in (k.FIX, k.WONT_FIX)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == ["ok", "stale"]
        report("hil-integrity")
