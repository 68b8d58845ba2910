"""Simulator tests: oracle fixtures, determinism, trace legality, comparisons."""

from __future__ import annotations

import pytest

from buglife import kernel as k
from buglife import simulator as sim
from buglife.kernel import Stage, StageOutcome, Thresholds, Workflow


def fixture_config(**overrides) -> sim.SimConfig:
    defaults = dict(
        workflow=Workflow.PROPOSED,
        success_prob={},
        validity_mix=0.0,
        arrival_count=1,
        seed=11,
        latency={Stage.REPORT_DIALOGUE.value: sim.constant(1.0)},
    )
    defaults.update(overrides)
    return sim.SimConfig(**defaults)


def repro_half_config(seed=11) -> sim.SimConfig:
    return fixture_config(
        success_prob={Stage.AGENT_REPRODUCTION.value: 0.5}, seed=seed
    )


class TestEnumerateExact:
    def test_repro_half_fixture_is_exact(self):
        # Outcome prefixes S, FS, FFS, FFF with probabilities .5/.25/.125/.125:
        # expected attempts 1*.5 + 2*.25 + 3*.125 + 3*.125 = 1.75,
        # escalation probability .125.
        oracle_attempts = 1 * 0.5 + 2 * 0.25 + 3 * 0.125 + 3 * 0.125
        oracle_escalation = 0.125
        metrics = sim.enumerate_exact(repro_half_config())
        assert metrics.attempts[Stage.AGENT_REPRODUCTION.value] == oracle_attempts
        assert metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value] == oracle_escalation

    def test_all_success_reduces_to_the_happy_path(self):
        metrics = sim.enumerate_exact(fixture_config())
        assert metrics.ttr_mean == 15.0  # one unit per happy-path stage
        assert metrics.ttr_median == 15.0
        assert metrics.hil_touches == 4.0
        assert metrics.handoffs == 3.0
        assert metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value] == 0.0

    def test_zero_success_forces_escalation(self):
        metrics = sim.enumerate_exact(
            fixture_config(success_prob={Stage.AGENT_REPRODUCTION.value: 0.0})
        )
        assert metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value] == 1.0
        assert metrics.attempts[Stage.AGENT_REPRODUCTION.value] == 3.0

    def test_invalid_branch_counts(self):
        metrics = sim.enumerate_exact(fixture_config(validity_mix=1.0))
        assert metrics.hil_touches == 2.0  # no-code verification + user verification
        assert metrics.handoffs == 1.0

    def test_traditional_happy_counts(self):
        config = sim.SimConfig(
            workflow=Workflow.TRADITIONAL, validity_mix=0.0, arrival_count=1, seed=3
        )
        metrics = sim.enumerate_exact(config)
        assert metrics.hil_touches == 13.0
        assert metrics.handoffs == 8.0
        assert metrics.ttr_mean == 13.0

    def test_unbounded_loop_exceeds_the_path_bound(self):
        config = sim.SimConfig(
            workflow=Workflow.TRADITIONAL,
            success_prob={Stage.NO_CODE_VERIFICATION.value: 0.5},
            validity_mix=1.0,
            arrival_count=1,
            seed=3,
        )
        with pytest.raises(sim.PathSpaceTooLarge):
            sim.enumerate_exact(config, max_paths=3000)

    def test_exponential_latency_rejected(self):
        config = fixture_config(default_latency=sim.Distribution("exponential", 2.0))
        with pytest.raises(sim.InvalidConfig):
            sim.enumerate_exact(config)

    def test_restart_cap_bounds_the_rejection_loop(self):
        config = fixture_config(
            success_prob={Stage.USER_VERIFICATION.value: 0.5}, restart_cap=1
        )
        metrics = sim.enumerate_exact(config)
        # Half the probability mass closes first pass; the rest restarts
        # once and is then forced to accept.
        assert metrics.ttr_mean > 15.0

    @pytest.mark.parametrize(
        "stage",
        [Stage.AGENT_REPRODUCTION, Stage.DEVELOPER_REVIEW, Stage.AGENT_VERIFICATION],
    )
    def test_lower_success_probability_never_lowers_expected_ttr(self, stage):
        last = None
        for prob in (1.0, 0.8, 0.6, 0.4):
            metrics = sim.enumerate_exact(
                fixture_config(success_prob={stage.value: prob})
            )
            if last is not None:
                assert metrics.ttr_mean >= last
            last = metrics.ttr_mean


class TestSimulate:
    def test_matches_exact_on_deterministic_config(self):
        exact = sim.enumerate_exact(fixture_config())
        metrics, _ = sim.simulate(fixture_config(), replications=5)
        assert metrics.ttr_mean == exact.ttr_mean == 15.0
        assert metrics.hil_touches == exact.hil_touches
        assert metrics.handoffs == exact.handoffs

    def test_zero_probability_forces_exact_counts(self):
        metrics, _ = sim.simulate(
            fixture_config(success_prob={Stage.AGENT_REPRODUCTION.value: 0.0}),
            replications=100,
        )
        assert metrics.attempts[Stage.AGENT_REPRODUCTION.value] == 3.0
        assert metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value] == 1.0

    def test_oracle_agreement_within_tolerance(self):
        metrics, _ = sim.simulate(repro_half_config(seed=42), replications=20_000)
        attempts = metrics.attempts[Stage.AGENT_REPRODUCTION.value]
        escalation = metrics.escalation_rates[Stage.AGENT_REPRODUCTION.value]
        assert abs(attempts - 1.75) / 1.75 < 0.02
        assert abs(escalation - 0.125) < 0.005

    def test_seeded_determinism(self):
        config = repro_half_config(seed=99)
        first, _ = sim.simulate(config, replications=500)
        second, _ = sim.simulate(config, replications=500)
        assert first.as_dict() == second.as_dict()
        shifted, _ = sim.simulate(repro_half_config(seed=100), replications=500)
        assert shifted.as_dict() != first.as_dict()

    def test_trace_legality_under_kernel_refeed(self):
        config = sim.SimConfig(
            workflow=Workflow.PROPOSED,
            success_prob={
                Stage.AGENT_REPRODUCTION.value: 0.6,
                Stage.DEVELOPER_REVIEW.value: 0.6,
                Stage.AGENT_VERIFICATION.value: 0.6,
                Stage.USER_VERIFICATION.value: 0.8,
            },
            validity_mix=0.3,
            arrival_count=1,
            seed=5,
        )
        _, traces = sim.simulate(config, replications=60, collect_traces=60)
        assert traces
        for trace in traces:
            case = k.init_case("refeed", config.thresholds, case_id="refeed")
            times = [entry.time for entry in trace]
            assert times == sorted(times)
            for entry in trace:
                assert case.stage.value == entry.stage
                case, _ = k.step(case, StageOutcome(entry.outcome), config.workflow)
            assert k.is_terminal(case.stage)

    def test_queueing_delays_under_contention(self):
        # Ten simultaneous arrivals share a single-server pool everywhere:
        # later cases must wait, so the p95 exceeds the uncontended TTR.
        config = sim.SimConfig(
            workflow=Workflow.TRADITIONAL,
            validity_mix=0.0,
            arrival_count=10,
            interarrival=sim.constant(0.0),
            seed=13,
        )
        metrics, _ = sim.simulate(config, replications=1)
        assert metrics.cases == 10
        assert metrics.ttr_p95 > 13.0

    def test_invalid_configs_rejected(self):
        with pytest.raises(sim.InvalidConfig):
            sim.SimConfig(success_prob={"NotAStage": 1.0}).validate()
        with pytest.raises(sim.InvalidConfig):
            sim.SimConfig(validity_mix=1.5).validate()
        with pytest.raises(sim.InvalidConfig):
            sim.SimConfig(arrival_count=0).validate()
        with pytest.raises(sim.InvalidConfig):
            sim.simulate(fixture_config(), replications=0)


class TestCompare:
    def test_proposed_touches_fewer_humans(self):
        traditional = sim.default_traditional_config()
        proposed = sim.default_proposed_config()
        all_success_t = sim.SimConfig(
            workflow=Workflow.TRADITIONAL, validity_mix=0.0,
            arrival_count=traditional.arrival_count, seed=1,
        )
        all_success_p = sim.SimConfig(
            workflow=Workflow.PROPOSED, validity_mix=0.0,
            arrival_count=proposed.arrival_count, seed=1,
            latency={Stage.REPORT_DIALOGUE.value: sim.constant(0.0)},
        )
        report = sim.compare(all_success_t, all_success_p, replications=3)
        assert report["b"]["hil_touches"] < report["a"]["hil_touches"]
        assert report["b"]["handoffs"] < report["a"]["handoffs"]
        assert report["delta"]["hil_touches"] == pytest.approx(4.0 - 13.0)
        assert report["assumptions"]

    def test_identical_configs_have_zero_deltas(self):
        config = fixture_config()
        report = sim.compare(config, config, replications=2)
        assert all(delta == 0 for delta in report["delta"].values())

    def test_mismatched_arrivals_incomparable(self):
        with pytest.raises(sim.IncomparableConfigs):
            sim.compare(fixture_config(), fixture_config(arrival_count=2))


class TestDefaults:
    def test_defaults_validate_and_close_under_all_success(self):
        for config in (sim.default_proposed_config(), sim.default_traditional_config()):
            config.validate()
            assert config.thresholds == Thresholds(3, 3, 3, 3)
            assert config.validity_mix == 0.2
            assert config.restart_cap == 2
            override = sim.SimConfig(
                workflow=config.workflow,
                validity_mix=0.0,
                arrival_count=1,
                seed=config.seed,
            )
            metrics, traces = sim.simulate(override, replications=1, collect_traces=1)
            assert traces and traces[0][-1].outcome == k.ACCEPT

    def test_json_round_trip(self):
        config = sim.default_proposed_config()
        rebuilt = sim.SimConfig.from_dict(config.as_dict())
        assert rebuilt.as_dict() == config.as_dict()

    def test_csv_trace_export(self):
        _, traces = sim.simulate(fixture_config(), replications=1, collect_traces=1)
        csv = sim.traces_to_csv(traces)
        lines = csv.strip().splitlines()
        assert lines[0] == "time,case,stage,actor"
        assert len(lines) == 16  # header + 15 happy-path stages
