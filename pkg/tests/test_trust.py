"""Belief recursion, multiplicative trust, action mapping, aggregation."""

import logging
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedshield.config import TrustConfig
from fedshield.rng import derive_stream
from fedshield.trust import (
    BELIEF_CEIL,
    BELIEF_FLOOR,
    HOLD,
    INCREASE,
    REDUCE,
    BeliefState,
    TrustVector,
    aggregate,
    bayes_update,
    trust_map,
    trust_update,
)

CFG = TrustConfig()


class TestBayesUpdate:
    def test_center_anomaly_is_fixed_point(self):
        for prev in (0.01, 0.25, 0.5, 0.75, 0.99):
            assert abs(bayes_update(prev, CFG.likelihood_center, CFG) - prev) < 1e-12

    @given(prev=st.floats(BELIEF_FLOOR, BELIEF_CEIL))
    @settings(max_examples=80, deadline=None)
    def test_center_fixed_point_any_prior(self, prev):
        assert abs(bayes_update(prev, CFG.likelihood_center, CFG) - prev) < 1e-12

    def test_unit_anomaly_from_even_prior_is_sigmoid_two(self):
        # gain*(1-center) = 2 and an even prior makes the posterior the
        # likelihood itself; smoothing off so the blend does not dilute it
        cfg = replace(CFG, smoothing=0.0)
        out = bayes_update(0.5, 1.0, cfg)
        assert abs(out - 0.8807970779778823) < 1e-12

    def test_sustained_max_anomaly_saturates(self):
        belief = 0.5
        for _ in range(20):
            belief = bayes_update(belief, 1.0, CFG)
        assert belief > 0.99 * BELIEF_CEIL

    def test_ceiling_clip_reached_exactly(self):
        belief = 0.5
        for _ in range(60):
            belief = bayes_update(belief, 1.0, CFG)
            assert belief <= BELIEF_CEIL
        assert belief == BELIEF_CEIL

    def test_floor_clip_reached_exactly(self):
        belief = 0.5
        for _ in range(60):
            belief = bayes_update(belief, 0.0, CFG)
            assert belief >= BELIEF_FLOOR
        assert belief == BELIEF_FLOOR

    def test_evidence_moves_belief_in_right_direction(self):
        assert bayes_update(0.5, 0.9, CFG) > 0.5
        assert bayes_update(0.5, 0.1, CFG) < 0.5

    @given(
        prev=st.floats(BELIEF_FLOOR, BELIEF_CEIL),
        anomaly=st.floats(0.0, 1.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_output_always_clipped(self, prev, anomaly):
        out = bayes_update(prev, anomaly, CFG)
        assert BELIEF_FLOOR <= out <= BELIEF_CEIL


class TestTrustUpdate:
    def test_full_anomaly_no_contribution_default_penalty(self):
        assert trust_update(1.0, 1.0, 0.0, CFG) == pytest.approx(0.7, abs=1e-15)

    def test_upper_clip(self):
        # 1 * (1 + 0.2*1) = 1.2 before the clip
        assert trust_update(1.0, 0.0, 1.0, CFG) == 1.0

    def test_lower_clip(self):
        cfg = replace(CFG, lambda_penalty=2.0)
        assert trust_update(1.0, 1.0, 0.0, cfg) == 0.0

    def test_zero_trust_is_absorbing(self):
        for anomaly, contribution in ((0.0, 1.0), (1.0, 0.0), (0.5, 0.5)):
            assert trust_update(0.0, anomaly, contribution, CFG) == 0.0

    @given(
        ts=st.floats(0.0, 1.0),
        anomaly=st.floats(0.0, 1.0),
        contribution=st.floats(0.0, 1.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_stays_in_unit_interval(self, ts, anomaly, contribution):
        assert 0.0 <= trust_update(ts, anomaly, contribution, CFG) <= 1.0


class TestTrustMap:
    def test_increase_scaled_by_disbelief(self):
        # 0.3 + 0.1*(1-0.2)
        assert trust_map(0.2, 0.3, INCREASE, CFG) == pytest.approx(0.38, abs=1e-15)

    def test_reduce_scaled_by_belief_plus_flat_penalty(self):
        # 0.7 - 0.1*0.8 - 0.02
        assert trust_map(0.8, 0.7, REDUCE, CFG) == pytest.approx(0.6, abs=1e-15)

    def test_hold_is_identity(self):
        for ts in (0.0, 0.37, 1.0):
            assert trust_map(0.9, ts, HOLD, CFG) == ts

    def test_increase_clips_at_one(self):
        assert trust_map(0.0, 0.99, INCREASE, CFG) == 1.0

    def test_reduce_clips_at_zero(self):
        assert trust_map(1.0, 0.05, REDUCE, CFG) == 0.0

    def test_unknown_action_errors(self):
        with pytest.raises(ValueError, match="unknown action"):
            trust_map(0.5, 0.5, 7, CFG)


def _random_instance(rng, renorm_safe=False):
    k = int(rng.integers(2, 8))
    n_clients = k + int(rng.integers(0, 5))
    ids = rng.permutation(n_clients)[:k].tolist()
    dim = int(rng.integers(1, 9))
    updates = [
        (int(c), rng.normal(size=dim) * 3.0, int(rng.integers(1, 100)))
        for c in ids
    ]
    low = 0.05 if renorm_safe else 0.0
    trust = low + (1.0 - low) * rng.uniform(size=n_clients)
    return updates, trust


def _oracle(updates, trust, renormalize):
    """Plain-Python reference: weight by sample share times trust, id order."""
    ordered = sorted(updates, key=lambda item: item[0])
    n_total = sum(item[2] for item in ordered)
    weights = [item[2] / n_total * trust[item[0]] for item in ordered]
    if renormalize:
        mass = sum(weights)
        if mass <= 0.0:
            weights = [item[2] / n_total for item in ordered]
        else:
            weights = [w / mass for w in weights]
    out = [0.0] * len(ordered[0][1])
    for w, (_, params, _) in zip(weights, ordered):
        for j, p in enumerate(params):
            out[j] += w * p
    return np.array(out)


class TestAggregate:
    def test_matches_brute_force_oracle(self):
        rng = derive_stream(7, "toy")
        for _ in range(100):
            updates, trust = _random_instance(rng, renorm_safe=True)
            got = aggregate(updates, trust, renormalize=True)
            assert np.allclose(got, _oracle(updates, trust, True), atol=1e-9)

    def test_matches_brute_force_oracle_unnormalized(self):
        rng = derive_stream(8, "toy")
        for _ in range(100):
            updates, trust = _random_instance(rng)
            got = aggregate(updates, trust, renormalize=False)
            assert np.allclose(got, _oracle(updates, trust, False), atol=1e-9)

    def test_uniform_trust_equal_sizes_is_fedavg(self):
        rng = derive_stream(9, "toy")
        updates = [(i, rng.normal(size=6), 20) for i in range(4)]
        trust = np.ones(4)
        got = aggregate(updates, trust)
        expected = np.zeros(6)
        for _, params, _ in updates:  # already in id order
            expected += 0.25 * params
        assert np.array_equal(got, expected)

    def test_zero_trust_client_fully_excluded(self):
        rng = derive_stream(10, "toy")
        u0, u1 = rng.normal(size=5), rng.normal(size=5)
        got = aggregate([(0, u0, 30), (1, u1, 70)], np.array([1.0, 0.0]))
        assert np.array_equal(got, u0)

    def test_hand_weights_one_seventh_six_sevenths(self):
        u0, u1 = np.full(4, 7.0), np.full(4, 14.0)
        got = aggregate([(0, u0, 100), (1, u1, 300)], np.array([0.5, 1.0]))
        expected = (1.0 / 7.0) * u0 + (6.0 / 7.0) * u1
        assert np.allclose(got, expected, atol=1e-9)

    def test_zero_mass_warns_and_falls_back_to_fedavg(self, caplog):
        rng = derive_stream(11, "toy")
        updates = [(i, rng.normal(size=4), 10 + i) for i in range(3)]
        with caplog.at_level(logging.WARNING, logger="fedshield.trust"):
            got = aggregate(updates, np.zeros(3), renormalize=True)
        assert any("trust mass zero" in rec.message for rec in caplog.records)
        n_total = sum(n for _, _, n in updates)
        expected = np.zeros(4)
        for _, params, n in updates:
            expected += (n / n_total) * params
        assert np.allclose(got, expected, atol=1e-12)

    def test_zero_mass_without_renormalize_gives_zero_vector(self, caplog):
        updates = [(0, np.ones(3), 10), (1, np.ones(3), 10)]
        with caplog.at_level(logging.WARNING, logger="fedshield.trust"):
            got = aggregate(updates, np.zeros(2), renormalize=False)
        assert np.array_equal(got, np.zeros(3))
        assert not caplog.records

    def test_literal_rule_shrinks_toward_zero(self):
        u = np.full(5, 2.0)
        got = aggregate([(0, u, 10), (1, u, 10)], np.array([0.5, 0.5]),
                        renormalize=False)
        assert np.allclose(got, np.full(5, 1.0), atol=1e-12)

    def test_renormalized_output_in_convex_hull(self):
        rng = derive_stream(12, "toy")
        for _ in range(20):
            updates, trust = _random_instance(rng, renorm_safe=True)
            got = aggregate(updates, trust, renormalize=True)
            stack = np.stack([np.asarray(p) for _, p, _ in updates])
            assert np.all(got >= stack.min(axis=0) - 1e-12)
            assert np.all(got <= stack.max(axis=0) + 1e-12)

    def test_input_order_irrelevant(self):
        rng = derive_stream(13, "toy")
        updates, trust = _random_instance(rng, renorm_safe=True)
        shuffled = [updates[i] for i in rng.permutation(len(updates))]
        assert np.array_equal(aggregate(updates, trust), aggregate(shuffled, trust))

    def test_distance_grows_as_trust_drops(self):
        u0, u1 = np.full(6, 1.0), np.zeros(6)
        dists = []
        for t0 in (1.0, 0.8, 0.5, 0.2):
            got = aggregate([(0, u0, 10), (1, u1, 10)], np.array([t0, 1.0]))
            dists.append(float(np.linalg.norm(got - u0)))
        assert all(b > a for a, b in zip(dists, dists[1:]))

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="no participant updates"):
            aggregate([], np.ones(3))


class TestStateContainers:
    def test_belief_state_initial(self):
        state = BeliefState.initial(5)
        assert np.array_equal(state.p_malicious, np.full(5, 0.5))
        assert len(state.history) == 1
        round_no, snap = state.history[0]
        assert round_no == 0
        assert np.array_equal(snap, np.full(5, 0.5))

    def test_trust_vector_initial(self):
        tv = TrustVector.initial(4)
        assert np.array_equal(tv.ts, np.ones(4))
        assert tv.history[0][0] == 0

    def test_record_snapshots_are_copies(self):
        tv = TrustVector.initial(3)
        tv.ts[0] = 0.2
        tv.record(1)
        tv.ts[0] = 0.9
        assert tv.history[1][1][0] == 0.2
        assert tv.history[0][1][0] == 1.0
