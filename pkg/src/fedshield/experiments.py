"""Experiment protocols: baseline, agent comparison, Dirichlet sweep, signal budget.

Each protocol expands into (condition, config) pairs, runs every condition
over its seed schedule (the same seed list for each condition), and writes
pooled CSVs, a summary JSON, and per-metric SVG plots into the output
directory. Failed runs are recorded and skipped in aggregation; callers exit
nonzero when any run failed.
"""

from __future__ import annotations

import dataclasses
import os
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from .config import (
    AGENT_KINDS,
    EXPERIMENT_KINDS,
    SIGNAL_BUDGETS,
    SimConfig,
    seed_schedule,
    serialize,
)
from .outputs import summarize, write_history_csv, write_rounds_csv, write_summary_json
from .simulation import run_simulation
from .svgplot import line_plot

__all__ = [
    "DIRICHLET_SWEEP_VALUES",
    "ExperimentSpec",
    "make_spec",
    "conditions",
    "run_experiment",
    "emit_outputs",
]

DIRICHLET_SWEEP_VALUES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 5.0)


@dataclass
class ExperimentSpec:
    kind: str
    base_config: SimConfig
    sweep_values: list
    seeds: list
    out_dir: str


def make_spec(kind: str, base_config: SimConfig, out_dir: str,
              seeds=None, sweep_values=None) -> ExperimentSpec:
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    if sweep_values is None:
        sweep_values = {
            "baseline": [None],
            "agent_comparison": list(AGENT_KINDS),
            "dirichlet_sweep": list(DIRICHLET_SWEEP_VALUES),
            "signal_budget": list(SIGNAL_BUDGETS),
        }[kind]
    if seeds is None:
        seeds = seed_schedule(kind)
    return ExperimentSpec(kind, base_config, list(sweep_values), list(seeds), out_dir)


def conditions(spec: ExperimentSpec) -> list:
    """Expand the spec into ordered (condition_name, config) pairs."""
    base = spec.base_config
    out = []
    for value in spec.sweep_values:
        if spec.kind == "baseline":
            out.append(("baseline", base))
        elif spec.kind == "agent_comparison":
            # The comparison intentionally uses the literal trust-weighted sum
            # (weights not renormalized, so total mass below 1 shrinks the
            # model). Whether a controller keeps the aggregate alive is the
            # behavior being compared; under renormalization every agent looks
            # alike because uniform trust changes cancel.
            out.append((str(value), dataclasses.replace(
                base, agent_kind=str(value), renormalize_aggregation=False)))
        elif spec.kind == "dirichlet_sweep":
            out.append((f"alpha={float(value):g}",
                        dataclasses.replace(base, dirichlet_alpha=float(value))))
        elif spec.kind == "signal_budget":
            out.append((str(value), dataclasses.replace(base, signal_budget=str(value))))
    return out


def _run_job(name: str, cfg: SimConfig, seed: int):
    result = run_simulation(cfg, seed)
    result.agent = None  # keep worker return values light and picklable
    return name, result


def run_experiment(spec: ExperimentSpec, jobs: int = 1):
    """Run every condition x seed, emit artifacts, return (summary, failures)."""
    job_list = [
        (name, cfg, seed) for name, cfg in conditions(spec) for seed in spec.seeds
    ]
    results_by_condition: dict = {}
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_job, *job): job for job in job_list}
            for future in as_completed(futures):
                name, _, seed = futures[future]
                try:
                    cond, result = future.result()
                except Exception:
                    failures.append((name, seed, traceback.format_exc(limit=3)))
                else:
                    results_by_condition.setdefault(cond, []).append(result)
    else:
        for name, cfg, seed in job_list:
            try:
                _, result = _run_job(name, cfg, seed)
            except Exception:
                failures.append((name, seed, traceback.format_exc(limit=3)))
            else:
                results_by_condition.setdefault(name, []).append(result)

    emit_outputs(results_by_condition, spec.out_dir, base_config=spec.base_config)
    return summarize(results_by_condition), failures


def _round_series(results: list, field: str):
    """Per-round mean and std over a condition's seeds; NaN where undefined."""
    n_rounds = max(len(r.records) for r in results)
    means, stds = [], []
    for i in range(n_rounds):
        vals = []
        for r in results:
            if i < len(r.records):
                v = getattr(r.records[i], field)
                if v is not None:
                    vals.append(float(v))
        if vals:
            means.append(float(np.mean(vals)))
            stds.append(float(np.std(vals, ddof=1)) if len(vals) >= 2 else 0.0)
        else:
            means.append(float("nan"))
            stds.append(float("nan"))
    return list(range(1, n_rounds + 1)), means, stds


def emit_outputs(results_by_condition: dict, out_dir: str,
                 base_config: SimConfig | None = None) -> None:
    """Write rounds/history CSVs, summary.json, SVG plots, and the config used."""
    os.makedirs(out_dir, exist_ok=True)
    write_rounds_csv(os.path.join(out_dir, "rounds.csv"), results_by_condition)
    write_history_csv(os.path.join(out_dir, "trust_history.csv"),
                      results_by_condition, "trust")
    write_history_csv(os.path.join(out_dir, "belief_history.csv"),
                      results_by_condition, "belief")
    write_summary_json(os.path.join(out_dir, "summary.json"),
                       summarize(results_by_condition))
    if base_config is not None:
        with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as fh:
            fh.write(serialize(base_config))
    plots = (
        ("accuracy", "accuracy_vs_round.svg", "test accuracy"),
        ("asr", "asr_vs_round.svg", "attack success rate"),
        ("roc_auc", "roc_auc_vs_round.svg", "detection ROC-AUC"),
        ("reward", "reward_vs_round.svg", "round reward"),
    )
    for field, fname, ylabel in plots:
        series = []
        for condition in sorted(results_by_condition):
            results = sorted(results_by_condition[condition], key=lambda r: r.seed)
            x, mean, std = _round_series(results, field)
            series.append({"label": condition, "x": x, "mean": mean, "std": std})
        line_plot(os.path.join(out_dir, fname),
                  f"{ylabel} vs round (mean +/- std over seeds)",
                  "round", ylabel, series)
