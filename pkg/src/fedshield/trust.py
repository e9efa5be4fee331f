"""Belief tracking, trust scores, and trust-weighted aggregation.

Each client carries a belief b (posterior probability of being malicious,
prior 0.5) updated recursively from the fused anomaly score through a sigmoid
likelihood model, and a trust score TS in [0,1] (initially 1) updated
multiplicatively by evidence and then nudged by the controller's action.
Aggregation weighs each participant by (n_i/n) * TS(i); weights are
renormalized to sum 1 by default so the parameter scale is preserved (the
literal un-normalized rule is available via renormalize=False).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TrustConfig

__all__ = [
    "INCREASE",
    "REDUCE",
    "HOLD",
    "ACTION_NAMES",
    "BELIEF_FLOOR",
    "BELIEF_CEIL",
    "BeliefState",
    "TrustVector",
    "bayes_update",
    "trust_update",
    "trust_map",
    "aggregate",
]

log = logging.getLogger(__name__)

INCREASE, REDUCE, HOLD = 0, 1, 2
ACTION_NAMES = {INCREASE: "increase", REDUCE: "reduce", HOLD: "hold"}

BELIEF_FLOOR = 1e-4
BELIEF_CEIL = 1.0 - 1e-4
# flat penalty applied on reduce in addition to the belief-weighted nudge
REDUCE_BASE_PENALTY = 0.02


@dataclass
class BeliefState:
    """Per-client P(malicious) plus per-round snapshots for heatmap export."""

    p_malicious: np.ndarray
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, n_clients: int) -> "BeliefState":
        p = np.full(n_clients, 0.5, dtype=np.float64)
        return cls(p_malicious=p, history=[(0, p.copy())])

    def record(self, round_no: int) -> None:
        self.history.append((round_no, self.p_malicious.copy()))


@dataclass
class TrustVector:
    """Per-client trust scores TS in [0,1], initialized to 1."""

    ts: np.ndarray
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, n_clients: int) -> "TrustVector":
        ts = np.ones(n_clients, dtype=np.float64)
        return cls(ts=ts, history=[(0, ts.copy())])

    def record(self, round_no: int) -> None:
        self.history.append((round_no, self.ts.copy()))


def _sigmoid(x: float) -> float:
    return float(1.0 / (1.0 + np.exp(-x)))


def bayes_update(prev: float, anomaly: float, cfg: TrustConfig) -> float:
    """One recursive posterior step from this round's anomaly evidence.

    Observation model: P(o|malicious) = sigmoid(gain * (anomaly - center)),
    P(o|benign) its complement. The raw posterior is blended with the prior
    (smoothing damps oscillations) and clipped away from 0/1 so later
    evidence can always move it.
    """
    p_mal = _sigmoid(cfg.likelihood_gain * (anomaly - cfg.likelihood_center))
    p_ben = 1.0 - p_mal
    raw = prev * p_mal / (prev * p_mal + (1.0 - prev) * p_ben)
    belief = (1.0 - cfg.smoothing) * raw + cfg.smoothing * prev
    return float(np.clip(belief, BELIEF_FLOOR, BELIEF_CEIL))


def trust_update(ts_prev: float, anomaly: float, contribution: float, cfg: TrustConfig) -> float:
    """Multiplicative evidence step TS * (1 - lambda*A + eta*C), clipped to [0,1]."""
    return float(np.clip(
        ts_prev * (1.0 - cfg.lambda_penalty * anomaly + cfg.eta_reward * contribution),
        0.0, 1.0,
    ))


def trust_map(belief: float, ts_after_update: float, action: int, cfg: TrustConfig) -> float:
    """Apply the controller's action on top of the evidence-updated trust.

    increase adds nudge*(1-belief) (small if the client looks malicious);
    reduce subtracts nudge*belief plus a flat penalty; hold is the identity.
    """
    if action == INCREASE:
        return float(np.clip(ts_after_update + cfg.action_nudge * (1.0 - belief), 0.0, 1.0))
    if action == REDUCE:
        return float(np.clip(
            ts_after_update - cfg.action_nudge * belief - REDUCE_BASE_PENALTY, 0.0, 1.0,
        ))
    if action == HOLD:
        return ts_after_update
    raise ValueError(f"unknown action {action!r}")


def aggregate(updates: list, trust: np.ndarray, renormalize: bool = True) -> np.ndarray:
    """Trust-weighted aggregation of participant updates.

    updates is a list of (client_id, params, n_samples); trust indexes by
    client id. Weight_i = (n_i/n) * TS(i), renormalized to sum 1 unless
    renormalize=False (the literal rule, which shrinks the model when trust
    drops). Zero total trust mass falls back to plain FedAvg with a warning.
    Summation runs in ascending client-id order so the result is independent
    of the input ordering.
    """
    if not updates:
        raise ValueError("no participant updates to aggregate")
    ordered = sorted(updates, key=lambda item: item[0])
    n_total = float(sum(item[2] for item in ordered))
    weights = np.array(
        [item[2] / n_total * float(trust[item[0]]) for item in ordered], dtype=np.float64
    )
    if renormalize:
        mass = float(weights.sum())
        if mass <= 0.0:
            log.warning("all trust mass zero; falling back to plain FedAvg")
            weights = np.array([item[2] / n_total for item in ordered], dtype=np.float64)
        else:
            weights = weights / mass
    out = np.zeros_like(np.asarray(ordered[0][1], dtype=np.float64))
    for weight, (_, params, _) in zip(weights, ordered):
        out += weight * np.asarray(params, dtype=np.float64)
    return out
