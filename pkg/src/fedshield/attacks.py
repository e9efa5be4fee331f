"""Malicious-client behaviors and per-round roster assignment.

Malicious identities are drawn once per run and stay fixed across rounds:
belief tracking accumulates evidence per client, and ROC-AUC needs stable
ground-truth labels. Ground truth is visible only to metrics and the reward
oracle, never to the defender pipeline.

backdoor poisons local data; sign_flip, gradient_push, and collusion rewrite
the submitted update. The paper names the four behaviors without formulas;
the forms below are declared reconstructions (see README).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AttackConfig
from .data import stamp_trigger
from .rng import RngStream

__all__ = [
    "RoundRoster",
    "draw_malicious_identities",
    "select_roster",
    "poison_data",
    "poison_update",
]


@dataclass(frozen=True)
class RoundRoster:
    """Participants this round plus which of them are attackers."""

    participating: tuple
    malicious: frozenset

    def __post_init__(self):
        if not self.malicious <= set(self.participating):
            raise ValueError("malicious clients must be participants")


def draw_malicious_identities(
    n_clients: int, malicious_ratio: float, rng: RngStream
) -> frozenset:
    """Fix round(ratio * n_clients) attacker identities for the whole run."""
    n_mal = int(round(malicious_ratio * n_clients))
    if n_mal == 0:
        return frozenset()
    ids = rng.choice(n_clients, size=n_mal, replace=False)
    return frozenset(int(i) for i in ids)


def select_roster(
    n_clients: int, k: int, malicious_ids: frozenset, rng: RngStream
) -> RoundRoster:
    """Sample k participants without replacement; mark the attacker subset."""
    if k > n_clients:
        raise ValueError(f"k={k} exceeds n_clients={n_clients}")
    chosen = rng.choice(n_clients, size=k, replace=False)
    participating = tuple(sorted(int(i) for i in chosen))
    return RoundRoster(participating, frozenset(participating) & malicious_ids)


def poison_data(
    features: np.ndarray, labels: np.ndarray, cfg: AttackConfig, rng: RngStream
):
    """Stamp the backdoor trigger on a backdoor_fraction subset and relabel.

    The poisoned count is floor(fraction * n) plus one Bernoulli trial on the
    remainder, so the expected count matches the fraction exactly. Sample
    count never changes.
    """
    if cfg.kind != "backdoor":
        raise ValueError(f"poison_data requires a backdoor attack, got {cfg.kind!r}")
    n = len(labels)
    exact = cfg.backdoor_fraction * n
    n_poison = int(np.floor(exact))
    if rng.uniform() < exact - n_poison:
        n_poison += 1
    if n_poison == 0:
        return features, labels
    idx = rng.choice(n, size=n_poison, replace=False)
    out_feats = np.array(features, copy=True)
    out_labels = np.array(labels, copy=True)
    out_feats[idx] = stamp_trigger(features[idx], cfg.trigger_size)
    out_labels[idx] = cfg.target_label
    return out_feats, out_labels


def poison_update(
    honest_update: np.ndarray,
    global_params: np.ndarray,
    peers: list,
    cfg: AttackConfig,
    rng: RngStream,
) -> np.ndarray:
    """Rewrite the honestly computed update according to the attack kind.

    peers holds the honest updates of every malicious participant this round
    (including the caller); only collusion reads it.
    """
    delta = honest_update - global_params
    if cfg.kind == "sign_flip":
        return global_params - (1.0 + cfg.strength) * delta
    if cfg.kind == "gradient_push":
        return global_params + (1.0 + 4.0 * cfg.strength) * delta
    if cfg.kind == "collusion":
        if not peers:
            raise ValueError("collusion requires at least one malicious participant")
        shared = np.mean([p - global_params for p in peers], axis=0)
        return global_params + (1.0 - cfg.strength) * delta + cfg.strength * shared
    raise ValueError(f"poison_update does not handle attack kind {cfg.kind!r}")
