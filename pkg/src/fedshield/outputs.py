"""Deterministic CSV/JSON artifact writers.

Column orders are frozen (documented in the README); floats are written with
repr (shortest round-trip form), so identical runs produce byte-identical
files. History CSVs are long-format (condition, seed, round, client_id,
value) with one row per client per round per seed, starting at round 1.
"""

from __future__ import annotations

import json

import numpy as np

ROUNDS_COLUMNS = ("condition", "seed", "round", "accuracy", "asr", "roc_auc", "ece", "reward")
HISTORY_COLUMNS = ("condition", "seed", "round", "client_id", "value")

__all__ = [
    "ROUNDS_COLUMNS",
    "HISTORY_COLUMNS",
    "write_rounds_csv",
    "write_history_csv",
    "write_summary_json",
    "summarize",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rounds_csv(path: str, results_by_condition: dict) -> None:
    """One row per round per run, ordered by condition, seed, round."""
    lines = [",".join(ROUNDS_COLUMNS)]
    for condition in sorted(results_by_condition):
        for result in sorted(results_by_condition[condition], key=lambda r: r.seed):
            for rec in result.records:
                lines.append(",".join([
                    condition,
                    str(result.seed),
                    str(rec.round),
                    _fmt(float(rec.accuracy)),
                    _fmt(float(rec.asr)),
                    _fmt(None if rec.roc_auc is None else float(rec.roc_auc)),
                    _fmt(float(rec.ece)),
                    _fmt(float(rec.reward)),
                ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_history_csv(path: str, results_by_condition: dict, which: str) -> None:
    """Long-format trust or belief history; rows only for rounds >= 1."""
    attr = {"trust": "trust_history", "belief": "belief_history"}[which]
    lines = [",".join(HISTORY_COLUMNS)]
    for condition in sorted(results_by_condition):
        for result in sorted(results_by_condition[condition], key=lambda r: r.seed):
            for round_no, values in getattr(result, attr):
                if round_no == 0:
                    continue
                for client_id, value in enumerate(values):
                    lines.append(",".join([
                        condition, str(result.seed), str(round_no),
                        str(client_id), _fmt(float(value)),
                    ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _mean_std(values: list) -> dict:
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    return {
        "mean": float(np.mean(vals)),
        "std": float(np.std(vals, ddof=1)) if len(vals) >= 2 else None,
        "n": len(vals),
    }


def summarize(results_by_condition: dict) -> dict:
    """Per-condition mean +/- sample std over seeds of the headline statistics."""
    out = {}
    for condition in sorted(results_by_condition):
        results = sorted(results_by_condition[condition], key=lambda r: r.seed)
        finals = [r.records[-1] for r in results]
        mean_aucs = []
        for r in results:
            defined = [rec.roc_auc for rec in r.records if rec.roc_auc is not None]
            mean_aucs.append(float(np.mean(defined)) if defined else None)
        out[condition] = {
            "seeds": [r.seed for r in results],
            "final_accuracy": _mean_std([rec.accuracy for rec in finals]),
            "final_asr": _mean_std([rec.asr for rec in finals]),
            "final_roc_auc": _mean_std([rec.roc_auc for rec in finals]),
            "final_ece": _mean_std([rec.ece for rec in finals]),
            "mean_roc_auc": _mean_std(mean_aucs),
            "pooled_roc_auc": _mean_std([r.pooled_auc for r in results]),
            "mean_reward": _mean_std(
                [float(np.mean([rec.reward for rec in r.records])) for r in results]
            ),
            "convergence_round": {
                "mean": float(np.mean([r.convergence for r in results])),
            },
        }
    return out


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
