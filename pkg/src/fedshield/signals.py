"""Per-client anomaly evidence and the observability budget.

Three signals per participating client: directional alignment of its update
delta with the round's mean delta, deviation of its delta norm from the
round median, and the accuracy change on a small server-side validation set.
They fuse into an anomaly score A and a contribution score C, both in [0,1].
Budgets mask signals the defender is not allowed to observe (masked slots are
zero-filled and flagged, so the state dimension never changes).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "ClientObservation",
    "AnomalyScores",
    "round_mean_delta",
    "directional_alignment",
    "magnitude_deviation",
    "validation_impact",
    "fuse_scores",
    "apply_budget",
]

_EPS = 1e-12


@dataclass(frozen=True)
class ClientObservation:
    """One round's signal triple for one client; mask flag true = observed."""

    directional: float
    magnitude: float
    validation: float
    mask_dir: bool = True
    mask_mag: bool = True
    mask_val: bool = True


class AnomalyScores(NamedTuple):
    anomaly: float
    contribution: float


def round_mean_delta(all_updates: list, global_params: np.ndarray) -> np.ndarray:
    """Mean of participants' update deltas, the round's consensus direction."""
    return np.mean([u - global_params for u in all_updates], axis=0)


def directional_alignment(
    update: np.ndarray, global_params: np.ndarray, mean_delta: np.ndarray
) -> float:
    """Cosine between this client's delta and the round mean delta.

    Cosine against the raw global parameter vector would be ~1 for everyone
    (shared initialization), so alignment is measured on deltas. Returns 0
    when either vector is numerically zero.
    """
    if update.shape != global_params.shape:
        raise ValueError("update and global parameter lengths differ")
    delta = update - global_params
    na = float(np.linalg.norm(delta))
    nb = float(np.linalg.norm(mean_delta))
    if na < _EPS or nb < _EPS:
        return 0.0
    return float(np.dot(delta, mean_delta) / (na * nb))


def magnitude_deviation(
    update: np.ndarray, all_updates: list, global_params: np.ndarray
) -> float:
    """Relative deviation of the delta norm from the round median, in [0, 10]."""
    if not all_updates:
        raise ValueError("need at least one participant update")
    norms = [float(np.linalg.norm(u - global_params)) for u in all_updates]
    med = float(np.median(norms))
    own = float(np.linalg.norm(update - global_params))
    return float(np.clip(abs(own - med) / (med + _EPS), 0.0, 10.0))


def validation_impact(model, update: np.ndarray, global_params: np.ndarray, val) -> float:
    """Validation-accuracy change if this update replaced the global model."""
    if len(val) == 0:
        raise ValueError("validation set is empty")
    acc_new = float(np.mean(model.predict(update, val.features) == val.labels))
    acc_old = float(np.mean(model.predict(global_params, val.features) == val.labels))
    return acc_new - acc_old


def fuse_scores(
    obs: ClientObservation, weights: tuple, val_scale: float = 5.0
) -> AnomalyScores:
    """Fuse observed signals into anomaly A and contribution C, both in [0,1].

    Anomaly terms: misalignment (1-dir)/2, magnitude deviation min(mag,2)/2,
    and accuracy damage max(-val,0)*val_scale, each clipped to [0,1], combined
    with the given weights renormalized over the observed fields. Contribution
    rewards observed positive validation impact (scaled) plus a small bonus
    for positive alignment.
    """
    w_dir, w_mag, w_val = weights
    masks = (obs.mask_dir, obs.mask_mag, obs.mask_val)
    active = [w for w, m in zip((w_dir, w_mag, w_val), masks) if m]
    if not active:
        raise ValueError("all signals masked; cannot fuse")
    total = sum(active)
    if total <= 0:
        raise ValueError("observed signal weights sum to zero")

    anomaly = 0.0
    if obs.mask_dir:
        anomaly += (w_dir / total) * float(np.clip((1.0 - obs.directional) / 2.0, 0.0, 1.0))
    if obs.mask_mag:
        anomaly += (w_mag / total) * float(np.clip(min(obs.magnitude, 2.0) / 2.0, 0.0, 1.0))
    if obs.mask_val:
        anomaly += (w_val / total) * float(np.clip(max(-obs.validation, 0.0) * val_scale, 0.0, 1.0))

    contribution = 0.0
    if obs.mask_val:
        contribution += max(obs.validation, 0.0) * val_scale
    if obs.mask_dir:
        contribution += max(obs.directional, 0.0) * 0.5
    return AnomalyScores(
        anomaly=float(np.clip(anomaly, 0.0, 1.0)),
        contribution=float(np.clip(contribution, 0.0, 1.0)),
    )


def apply_budget(obs: ClientObservation, budget: str) -> ClientObservation:
    """Mask signals outside the budget; masked fields are zero-filled."""
    if budget == "full":
        return obs
    if budget == "no_validation":
        return replace(obs, validation=0.0, mask_val=False)
    if budget == "directional_only":
        return replace(obs, magnitude=0.0, validation=0.0, mask_mag=False, mask_val=False)
    raise ValueError(f"unknown signal budget {budget!r}")
