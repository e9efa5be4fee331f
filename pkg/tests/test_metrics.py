"""Evaluation metrics against hand computations and exhaustive oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedshield.config import AttackConfig
from fedshield.data import Dataset
from fedshield.metrics import (
    accuracy,
    asr_applicable,
    attack_success_rate,
    confidence_correct,
    convergence_round,
    ece,
    roc_auc,
)
from fedshield.models import MlpModel
from fedshield.rng import derive_stream


def _perfect_setup(n_classes=10, n_per_class=10):
    """One-hot features plus hand weights that classify them perfectly."""
    labels = np.repeat(np.arange(n_classes), n_per_class)
    feats = np.eye(n_classes)[labels] * 4.0
    model = MlpModel(n_classes, n_classes, n_classes)
    params = model.pack(np.eye(n_classes), np.zeros(n_classes),
                        10.0 * np.eye(n_classes), np.zeros(n_classes))
    return model, params, Dataset(feats, labels, n_classes)


class TestAccuracy:
    def test_zero_params_on_balanced_set_is_chance(self):
        model, _, data = _perfect_setup()
        assert accuracy(model, np.zeros(model.n_params), data) == 0.1

    def test_perfect_classifier(self):
        model, params, data = _perfect_setup()
        assert accuracy(model, params, data) == 1.0

    def test_hand_count_with_corrupted_labels(self):
        model, params, data = _perfect_setup(n_classes=5, n_per_class=1)
        labels = data.labels.copy()
        labels[0] = 1
        labels[4] = 0
        assert accuracy(model, params, Dataset(data.features, labels, 5)) == 0.6

    def test_empty_set_errors(self):
        model = MlpModel(3, 2, 2)
        empty = Dataset(np.zeros((0, 3)), np.zeros(0, dtype=int), 2)
        with pytest.raises(ValueError, match="empty evaluation"):
            accuracy(model, np.zeros(model.n_params), empty)


class TestAttackSuccessRate:
    def test_zero_model_predicts_target_everywhere(self):
        # all-zero parameters predict class 0; target_label 0 means every
        # triggered sample counts as a success
        model, _, data = _perfect_setup(n_classes=4, n_per_class=5)
        attack = AttackConfig(kind="backdoor", target_label=0, trigger_size=2)
        out = attack_success_rate(model, np.zeros(model.n_params), data, attack)
        assert out == 1.0

    def test_perfect_model_ignores_trigger(self):
        # trigger_size=2 stamps a 2x2 block, features 0..3; classes 4 and 5
        # keep their one-hot slot clear of it, so the hand model still wins
        # the argmax and the success rate bottoms out at 0
        model, params, data = _perfect_setup(n_classes=6, n_per_class=5)
        keep = data.labels >= 4
        data = Dataset(data.features[keep], data.labels[keep], 6)
        attack = AttackConfig(kind="backdoor", target_label=0, trigger_size=2)
        assert attack_success_rate(model, params, data, attack) == 0.0

    def test_only_target_class_errors(self):
        model, params, _ = _perfect_setup(n_classes=3, n_per_class=2)
        only_target = Dataset(np.zeros((4, 3)), np.zeros(4, dtype=int), 3)
        attack = AttackConfig(kind="backdoor", target_label=0, trigger_size=1)
        with pytest.raises(ValueError, match="only target-class"):
            attack_success_rate(model, params, only_target, attack)

    def test_non_backdoor_not_applicable_and_zero(self):
        model, params, data = _perfect_setup(n_classes=3, n_per_class=2)
        attack = AttackConfig(kind="sign_flip")
        assert not asr_applicable(attack)
        assert attack_success_rate(model, params, data, attack) == 0.0

    def test_backdoor_applicable(self):
        assert asr_applicable(AttackConfig(kind="backdoor"))


def _auc_oracle(scores, labels):
    wins = ties = pairs = 0
    for s, l in zip(scores, labels):
        if not l:
            continue
        for s2, l2 in zip(scores, labels):
            if l2:
                continue
            pairs += 1
            if s > s2:
                wins += 1
            elif s == s2:
                ties += 1
    return (wins + 0.5 * ties) / pairs


class TestRocAuc:
    def test_separable_hand_case(self):
        assert roc_auc([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0]) == 1.0

    def test_three_quarters_hand_case(self):
        assert roc_auc([0.8, 0.7, 0.6, 0.5], [1, 0, 1, 0]) == 0.75

    def test_all_tied_scores(self):
        assert roc_auc([0.3, 0.3, 0.3, 0.3], [1, 1, 0, 0]) == 0.5

    def test_matches_exhaustive_pairwise_oracle(self):
        rng = derive_stream(30, "toy")
        for _ in range(50):
            n = int(rng.integers(2, 13))
            scores = np.round(rng.uniform(size=n), 1)  # coarse grid forces ties
            labels = rng.integers(0, 2, size=n).astype(bool)
            if labels.all() or not labels.any():
                labels[0] = ~labels[0]
            assert roc_auc(scores, labels) == _auc_oracle(scores, labels)

    def test_label_complement_sums_to_one(self):
        rng = derive_stream(31, "toy")
        scores = rng.uniform(size=20)  # continuous draws: ties almost surely absent
        labels = np.array([True] * 10 + [False] * 10)
        total = roc_auc(scores, labels) + roc_auc(scores, ~labels)
        assert abs(total - 1.0) < 1e-12

    def test_invariant_to_monotone_transform(self):
        rng = derive_stream(32, "toy")
        scores = rng.uniform(size=15)
        labels = rng.integers(0, 2, size=15).astype(bool)
        labels[0], labels[1] = True, False
        assert roc_auc(np.exp(scores) * 3.0 + 1.0, labels) == roc_auc(scores, labels)

    def test_single_class_errors(self):
        with pytest.raises(ValueError, match="both classes"):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(ValueError, match="both classes"):
            roc_auc([0.1, 0.2], [0, 0])


class TestEce:
    def test_matching_confidence_zero_error(self):
        assert ece([0.75, 0.75, 0.75, 0.75], [True, True, True, False]) == 0.0

    def test_single_bin_overconfident(self):
        assert ece([1.0, 1.0, 1.0, 1.0], [True, False, True, False], n_bins=1) == 0.5

    def test_top_confidence_falls_in_last_bin(self):
        assert ece([1.0, 1.0], [True, False], n_bins=15) == 0.5

    def test_two_bin_hand_case(self):
        out = ece([0.2, 0.2, 0.9, 0.9], [False, True, True, True], n_bins=2)
        assert out == pytest.approx(0.2, abs=1e-12)

    @given(
        confs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounded_unit_interval(self, confs, seed):
        correct = derive_stream(seed, "toy").integers(0, 2, size=len(confs)).astype(bool)
        assert 0.0 <= ece(confs, correct) <= 1.0

    def test_length_mismatch_errors(self):
        with pytest.raises(ValueError, match="equal-length"):
            ece([0.5, 0.5], [True])

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="equal-length"):
            ece([], [])


class TestConfidenceCorrect:
    def test_uniform_model(self):
        model = MlpModel(4, 3, 4)
        data = Dataset(np.eye(4), np.array([0, 1, 2, 3]), 4)
        conf, correct = confidence_correct(model, np.zeros(model.n_params), data)
        assert np.array_equal(conf, np.full(4, 0.25))
        assert np.array_equal(correct, [True, False, False, False])


class TestConvergenceRound:
    def test_flat_series_converges_at_first_window(self):
        assert convergence_round([0.8] * 10, window=3) == 3

    def test_ramp_then_plateau(self):
        acc = [0.04 * i for i in range(1, 21)] + [0.8] * 30
        out = convergence_round(acc, window=3)
        assert 19 <= out <= 22

    def test_late_jump_converges_at_end(self):
        acc = [0.1] * 47 + [0.9] * 3
        assert convergence_round(acc, window=3) == 50

    def test_series_shorter_than_window(self):
        assert convergence_round([0.5, 1.0], window=3) == 2
        assert convergence_round([0.42], window=3) == 1

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="empty accuracy"):
            convergence_round([])
