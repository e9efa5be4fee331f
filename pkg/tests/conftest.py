"""Shared fixtures and oracle helpers for the test suite."""

import dataclasses

import numpy as np
import pytest

from fedshield.config import (
    AttackConfig,
    ClientTrainConfig,
    DataConfig,
    DqnConfig,
    SimConfig,
)


def central_difference(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of scalar f at x, one coordinate at a time."""
    grad = np.zeros_like(x, dtype=np.float64)
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-coordinate relative error with a unit floor on the denominator."""
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


@pytest.fixture
def tiny_config() -> SimConfig:
    """Small everything so full simulations finish in tens of milliseconds."""
    return SimConfig(
        n_clients=6,
        participants_per_round=3,
        rounds=5,
        dirichlet_alpha=0.5,
        malicious_ratio=0.2,
        attack=AttackConfig(trigger_size=2),
        dqn=DqnConfig(hidden_units=16, batch_size=8, buffer_capacity=200,
                      eps_decay_steps=30, target_update_every=10),
        client_train=ClientTrainConfig(batch_size=16, local_epochs=2),
        data=DataConfig(n_classes=3, feature_dim=12, n_train=90, n_val=60,
                        n_test=60, noise=1.0, mean_scale=2.0, hidden_units=8),
    )


@pytest.fixture
def tiny_clean_config(tiny_config) -> SimConfig:
    return dataclasses.replace(tiny_config, malicious_ratio=0.0, agent_kind="random")
