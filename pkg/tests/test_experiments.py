"""Protocol expansion, seed schedules, artifact emission, failure handling."""

import dataclasses
import json
import os

import pytest

import fedshield.experiments as experiments_mod
from fedshield.config import AGENT_KINDS, SIGNAL_BUDGETS, SimConfig
from fedshield.experiments import (
    DIRICHLET_SWEEP_VALUES,
    conditions,
    make_spec,
    run_experiment,
)


class TestMakeSpec:
    def test_baseline_defaults(self, tiny_config):
        spec = make_spec("baseline", tiny_config, "out")
        assert spec.sweep_values == [None]
        assert spec.seeds == [42, 64, 128, 200, 256]

    def test_agent_comparison_defaults(self, tiny_config):
        spec = make_spec("agent_comparison", tiny_config, "out")
        assert spec.sweep_values == list(AGENT_KINDS)
        assert spec.seeds == [42, 43, 44, 45, 46]

    def test_dirichlet_defaults(self, tiny_config):
        spec = make_spec("dirichlet_sweep", tiny_config, "out")
        assert spec.sweep_values == list(DIRICHLET_SWEEP_VALUES)
        assert len(spec.sweep_values) == 11
        assert spec.seeds == [42, 43, 44, 45, 46]

    def test_signal_budget_defaults(self, tiny_config):
        spec = make_spec("signal_budget", tiny_config, "out")
        assert spec.sweep_values == list(SIGNAL_BUDGETS)
        assert spec.seeds == [42, 64, 128, 200, 256]

    def test_explicit_seeds_and_values_override(self, tiny_config):
        spec = make_spec("dirichlet_sweep", tiny_config, "out",
                         seeds=[1, 2], sweep_values=[0.5])
        assert spec.seeds == [1, 2]
        assert spec.sweep_values == [0.5]

    def test_unknown_kind_errors(self, tiny_config):
        with pytest.raises(ValueError, match="unknown experiment kind"):
            make_spec("pilot", tiny_config, "out")


class TestConditions:
    def test_baseline_single_condition(self, tiny_config):
        pairs = conditions(make_spec("baseline", tiny_config, "out"))
        assert len(pairs) == 1
        name, cfg = pairs[0]
        assert name == "baseline"
        assert cfg == tiny_config

    def test_agent_comparison_sets_kind_and_literal_aggregation(self, tiny_config):
        pairs = conditions(make_spec("agent_comparison", tiny_config, "out"))
        assert [name for name, _ in pairs] == list(AGENT_KINDS)
        for name, cfg in pairs:
            assert cfg.agent_kind == name
            assert cfg.renormalize_aggregation is False

    def test_dirichlet_names_and_alphas(self, tiny_config):
        pairs = conditions(make_spec("dirichlet_sweep", tiny_config, "out"))
        assert [name for name, _ in pairs][:3] == ["alpha=0.1", "alpha=0.2", "alpha=0.3"]
        assert pairs[-1][0] == "alpha=5"
        assert pairs[-1][1].dirichlet_alpha == 5.0
        # everything but alpha inherits the base config
        assert pairs[0][1] == dataclasses.replace(tiny_config, dirichlet_alpha=0.1)

    def test_signal_budget_conditions(self, tiny_config):
        pairs = conditions(make_spec("signal_budget", tiny_config, "out"))
        assert [name for name, _ in pairs] == list(SIGNAL_BUDGETS)
        for name, cfg in pairs:
            assert cfg.signal_budget == name

    def test_job_count_without_running(self, tiny_config):
        spec = make_spec("dirichlet_sweep", tiny_config, "out")
        n_jobs = len(conditions(spec)) * len(spec.seeds)
        assert n_jobs == 11 * 5


ARTIFACTS = (
    "rounds.csv", "trust_history.csv", "belief_history.csv", "summary.json",
    "config.yaml", "accuracy_vs_round.svg", "asr_vs_round.svg",
    "roc_auc_vs_round.svg", "reward_vs_round.svg",
)


class TestRunExperiment:
    def test_baseline_emits_all_artifacts(self, tiny_config, tmp_path):
        out = tmp_path / "exp"
        spec = make_spec("baseline", tiny_config, str(out), seeds=[1, 2])
        summary, failures = run_experiment(spec)
        assert failures == []
        for name in ARTIFACTS:
            assert (out / name).exists(), name
        assert set(summary) == {"baseline"}
        entry = summary["baseline"]
        assert entry["seeds"] == [1, 2]
        assert set(entry) == {
            "seeds", "final_accuracy", "final_asr", "final_roc_auc", "final_ece",
            "mean_roc_auc", "pooled_roc_auc", "mean_reward", "convergence_round",
        }
        on_disk = json.loads((out / "summary.json").read_text())
        assert on_disk == summary

    def test_rounds_csv_covers_all_jobs(self, tiny_config, tmp_path):
        out = tmp_path / "exp"
        spec = make_spec("signal_budget", tiny_config, str(out), seeds=[1])
        _, failures = run_experiment(spec)
        assert failures == []
        lines = (out / "rounds.csv").read_text().splitlines()
        assert len(lines) - 1 == len(SIGNAL_BUDGETS) * tiny_config.rounds

    def test_failures_recorded_and_condition_skipped(self, tiny_config, tmp_path,
                                                     monkeypatch):
        real = experiments_mod._run_job

        def sabotaged(name, cfg, seed):
            if name == "no_validation":
                raise RuntimeError("synthetic failure")
            return real(name, cfg, seed)

        monkeypatch.setattr(experiments_mod, "_run_job", sabotaged)
        out = tmp_path / "exp"
        spec = make_spec("signal_budget", tiny_config, str(out), seeds=[1, 2])
        summary, failures = run_experiment(spec)
        assert [(name, seed) for name, seed, _ in failures] == [
            ("no_validation", 1), ("no_validation", 2)]
        assert all("synthetic failure" in tb for _, _, tb in failures)
        assert "no_validation" not in summary
        assert set(summary) == {"full", "directional_only"}
        for name in ARTIFACTS:
            assert (out / name).exists(), name

    def test_config_yaml_reflects_base_config(self, tiny_config, tmp_path):
        out = tmp_path / "exp"
        spec = make_spec("baseline", tiny_config, str(out), seeds=[1])
        run_experiment(spec)
        text = (out / "config.yaml").read_text()
        assert f"n_clients: {tiny_config.n_clients}" in text
        assert f"rounds: {tiny_config.rounds}" in text

    def test_workers_match_sequential(self, tiny_config, tmp_path):
        seq_out, par_out = tmp_path / "seq", tmp_path / "par"
        spec_seq = make_spec("baseline", tiny_config, str(seq_out), seeds=[1, 2])
        spec_par = make_spec("baseline", tiny_config, str(par_out), seeds=[1, 2])
        summary_seq, _ = run_experiment(spec_seq, jobs=1)
        summary_par, _ = run_experiment(spec_par, jobs=2)
        assert summary_seq == summary_par
        assert (seq_out / "rounds.csv").read_bytes() == (par_out / "rounds.csv").read_bytes()
