"""Evaluation metrics: accuracy, ASR, ROC-AUC, ECE, convergence round.

Accuracy and ASR use disjoint inputs by construction: accuracy sees only the
clean test split, ASR only triggered copies of non-target-class test samples.
ROC-AUC scores the defender's beliefs against ground-truth malicious labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AttackConfig
from .data import Dataset, stamp_trigger

__all__ = [
    "RoundRecord",
    "accuracy",
    "attack_success_rate",
    "asr_applicable",
    "roc_auc",
    "ece",
    "confidence_correct",
    "convergence_round",
]


@dataclass
class RoundRecord:
    """One round's metrics row, the unit written to rounds.csv."""

    round: int
    accuracy: float
    asr: float
    roc_auc: float | None
    ece: float
    reward: float
    per_client_trust: list
    per_client_belief: list


def accuracy(model, params: np.ndarray, dataset: Dataset) -> float:
    """Fraction of argmax-correct predictions (ties go to the lowest class)."""
    if len(dataset) == 0:
        raise ValueError("empty evaluation set")
    return float(np.mean(model.predict(params, dataset.features) == dataset.labels))


def asr_applicable(attack: AttackConfig) -> bool:
    return attack.kind == "backdoor"


def attack_success_rate(model, params: np.ndarray, test: Dataset,
                        attack: AttackConfig) -> float:
    """Fraction of triggered non-target-class test samples classified as target.

    For non-backdoor attacks there is no trigger; ASR is defined as 0 (the
    output layer marks it not-applicable via asr_applicable).
    """
    if not asr_applicable(attack):
        return 0.0
    keep = test.labels != attack.target_label
    if not np.any(keep):
        raise ValueError("ASR undefined: test set has only target-class samples")
    triggered = stamp_trigger(test.features[keep], attack.trigger_size)
    preds = model.predict(params, triggered)
    return float(np.mean(preds == attack.target_label))


def roc_auc(scores, labels) -> float:
    """Exact Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(equal)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pos = scores[labels]
    neg = scores[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("ROC-AUC undefined without both classes")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return float((wins + 0.5 * ties) / (len(pos) * len(neg)))


def ece(confidences, correct, n_bins: int = 15) -> float:
    """Expected calibration error over equal-width confidence bins on [0,1]."""
    confidences = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if len(confidences) == 0 or len(confidences) != len(correct):
        raise ValueError("confidences and correct must be equal-length, non-empty")
    idx = np.minimum((confidences * n_bins).astype(np.int64), n_bins - 1)
    total = len(confidences)
    out = 0.0
    for b in range(n_bins):
        members = idx == b
        count = int(np.count_nonzero(members))
        if count == 0:
            continue
        gap = abs(float(np.mean(correct[members])) - float(np.mean(confidences[members])))
        out += (count / total) * gap
    return float(out)


def confidence_correct(model, params: np.ndarray, dataset: Dataset):
    """Max predicted probability and correctness per test sample, for ECE."""
    probs = model.forward(params, dataset.features)
    conf = probs.max(axis=1)
    preds = probs.argmax(axis=1)
    return conf, preds == dataset.labels


def convergence_round(acc_by_round, window: int = 3) -> int:
    """First round whose trailing-window mean reaches 95% of the final plateau.

    Rounds are 1-based. Series shorter than the window use the full series as
    the window. Returns the total round count if the threshold is never met.
    """
    acc = np.asarray(acc_by_round, dtype=np.float64)
    if len(acc) == 0:
        raise ValueError("empty accuracy series")
    w = min(window, len(acc))
    trailing = np.convolve(acc, np.ones(w) / w, mode="valid")
    threshold = 0.95 * trailing[-1]
    for offset, value in enumerate(trailing):
        if value >= threshold:
            return offset + w
    return len(acc)
