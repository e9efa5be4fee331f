"""Synthetic dataset, Dirichlet label-skew partitioning, and the backdoor trigger.

The dataset is a Gaussian class-cluster problem standing in for CIFAR-10 at
desk scale: class means are drawn once per run from a scaled standard normal,
and every sample is its class mean plus isotropic noise. The backdoor trigger
is the feature-space analogue of a corner pixel patch: the first
trigger_size^2 coordinates are clamped to a constant outside the data range.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .rng import RngStream

__all__ = [
    "TRIGGER_VALUE",
    "Sample",
    "Dataset",
    "Partition",
    "make_synthetic",
    "dirichlet_partition",
    "apply_trigger",
    "stamp_trigger",
    "export_csv",
    "import_csv",
]

# Clamp value for triggered coordinates; features are N(mean, noise) with
# means ~ 3*N(0,1), so a constant 3.0 block is far from any class structure.
TRIGGER_VALUE = 3.0


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass
class Dataset:
    """Feature matrix (n, d) with integer labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i].copy(), int(self.labels[i]))


@dataclass
class Partition:
    """Per-client index lists forming an exact set-partition of the pool."""

    client_indices: list
    dirichlet_alpha: float

    def check(self, pool_size: int) -> None:
        all_idx = np.concatenate([np.asarray(c) for c in self.client_indices])
        if len(all_idx) != pool_size or len(np.unique(all_idx)) != pool_size:
            raise ValueError("partition must cover the pool exactly once")
        if any(len(c) == 0 for c in self.client_indices):
            raise ValueError("every client needs at least one sample")


def make_synthetic(
    n_classes: int,
    feature_dim: int,
    n_train: int,
    n_val: int,
    n_test: int,
    noise: float,
    rng: RngStream,
    mean_scale: float = 3.0,
):
    """Draw disjoint train/val/test splits of the Gaussian-cluster problem.

    Labels are uniform categorical; class c's mean vector is fixed for the
    whole run. With noise=0 every sample equals its class mean.
    """
    for name, count in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if count < n_classes:
            raise ValueError(f"{name}={count} must be >= n_classes={n_classes}")
    means = rng.normal(size=(n_classes, feature_dim)) * mean_scale
    total = n_train + n_val + n_test
    labels = rng.integers(0, n_classes, size=total)
    features = means[labels] + noise * rng.normal(size=(total, feature_dim))
    splits = []
    start = 0
    for count in (n_train, n_val, n_test):
        sl = slice(start, start + count)
        splits.append(Dataset(features[sl], labels[sl], n_classes))
        start += count
    return tuple(splits)


def dirichlet_partition(
    dataset: Dataset, n_clients: int, alpha: float, rng: RngStream
) -> Partition:
    """Label-skew split: each class's mass over clients ~ Dirichlet(alpha).

    Class index pools are shuffled, then cut into per-client blocks whose sizes
    come from largest-remainder rounding of the drawn proportions. Any client
    left empty steals one sample from the currently largest client.
    """
    if len(dataset) == 0:
        raise ValueError("cannot partition an empty dataset")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    per_client: list = [[] for _ in range(n_clients)]
    for c in range(dataset.n_classes):
        class_idx = np.flatnonzero(dataset.labels == c)
        if len(class_idx) == 0:
            continue
        class_idx = rng.permutation(class_idx)
        props = rng.gen.dirichlet(np.full(n_clients, alpha, dtype=np.float64))
        counts = _largest_remainder(props, len(class_idx))
        start = 0
        for client, count in enumerate(counts):
            per_client[client].extend(class_idx[start:start + count].tolist())
            start += count
    # ties broken toward the lowest client id keep the repair deterministic
    for client in range(n_clients):
        while not per_client[client]:
            donor = max(range(n_clients), key=lambda j: (len(per_client[j]), -j))
            if len(per_client[donor]) <= 1:
                raise ValueError("too few samples to give every client one")
            per_client[client].append(per_client[donor].pop())
    indices = [np.array(sorted(c), dtype=np.int64) for c in per_client]
    part = Partition(indices, dirichlet_alpha=alpha)
    part.check(len(dataset))
    return part


def _largest_remainder(props: np.ndarray, total: int) -> np.ndarray:
    scaled = props * total
    base = np.floor(scaled).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        remainders = scaled - base
        order = np.argsort(-remainders, kind="stable")
        base[order[:short]] += 1
    return base


def stamp_trigger(features: np.ndarray, trigger_size: int) -> np.ndarray:
    """Clamp the first trigger_size^2 coordinates to the trigger constant."""
    block = trigger_size * trigger_size
    if block > features.shape[-1]:
        raise ValueError(
            f"trigger block {block} exceeds feature_dim {features.shape[-1]}"
        )
    out = np.array(features, dtype=np.float64, copy=True)
    out[..., :block] = TRIGGER_VALUE
    return out


def apply_trigger(sample: Sample, trigger_size: int, target_label: int) -> Sample:
    """Stamp the trigger and relabel to the attacker's target class. Idempotent."""
    return Sample(stamp_trigger(sample.features, trigger_size), int(target_label))


def export_csv(dataset: Dataset, path: str) -> None:
    """Write `f0..f{d-1},label` rows; floats use shortest round-trip repr."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(dataset.feature_dim)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def import_csv(path: str, n_classes: int | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise ValueError(f"{path}: expected a header row ending in 'label'")
        feats, labels = [], []
        for row in reader:
            feats.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    labels_arr = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels_arr.max()) + 1 if len(labels_arr) else 1
    return Dataset(np.asarray(feats, dtype=np.float64), labels_arr, n_classes)
