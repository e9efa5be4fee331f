"""Round-level simulation: local training, attacks, defense, aggregation.

Each round runs, in order: roster selection, malicious poisoning, per-client
local SGD, anomaly signal extraction with budget masking, the recursive
belief update, state encoding, per-client action selection, the evidence
trust update followed by the action trust map, trust-weighted aggregation,
metric evaluation, reward computation, and the controller's learning step.
The actions at round t therefore see beliefs already updated with round-t
observations, and aggregation uses the round-t trust scores.

Learning controllers receive per-client transitions that close the next time
the same client participates (its new state is the successor state); open
transitions flush as terminal at run end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import (
    Transition,
    compute_reward,
    encode_state,
    make_agent,
    reward_components,
    run_agent_round,
)
from .attacks import draw_malicious_identities, poison_data, poison_update, select_roster
from .config import SimConfig
from .data import make_synthetic, dirichlet_partition
from .metrics import (
    RoundRecord,
    accuracy,
    attack_success_rate,
    confidence_correct,
    convergence_round,
    ece,
    roc_auc,
)
from .models import MlpModel, local_train
from .rng import derive_stream
from .signals import (
    ClientObservation,
    apply_budget,
    directional_alignment,
    fuse_scores,
    magnitude_deviation,
    round_mean_delta,
)
from .trust import BeliefState, TrustVector, bayes_update, trust_map, trust_update, aggregate

__all__ = ["SimResult", "Simulation", "run_simulation"]


@dataclass
class SimResult:
    """Everything one full run produces, ready for CSV/JSON export."""

    config: SimConfig
    seed: int
    records: list
    trust_history: list
    belief_history: list
    rosters: list
    malicious_ids: frozenset
    convergence: int
    pooled_auc: float | None
    agent: object = field(repr=False, default=None)


class Simulation:
    """Mutable state of one run; run() drives all rounds deterministically."""

    def __init__(self, cfg: SimConfig, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.master_seed if seed is None else int(seed)
        d = cfg.data
        self.train, self.val, self.test = make_synthetic(
            d.n_classes, d.feature_dim, d.n_train, d.n_val, d.n_test,
            d.noise, derive_stream(self.seed, "data"), mean_scale=d.mean_scale,
        )
        self.model = MlpModel(d.feature_dim, d.hidden_units, d.n_classes)
        self.global_params = self.model.init_params(derive_stream(self.seed, "init"))
        partition = dirichlet_partition(
            self.train, cfg.n_clients, cfg.dirichlet_alpha,
            derive_stream(self.seed, "partition"),
        )
        self.client_data = [self.train.subset(idx) for idx in partition.client_indices]
        self.malicious_ids = draw_malicious_identities(
            cfg.n_clients, cfg.malicious_ratio, derive_stream(self.seed, "malicious"),
        )
        self.belief = BeliefState.initial(cfg.n_clients)
        self.trust = TrustVector.initial(cfg.n_clients)
        self.agent = make_agent(cfg.agent_kind, cfg.dqn, derive_stream(self.seed, "agent-init"))
        self.pending = {}
        self.records: list = []
        self.rosters: list = []
        self.prev_val_acc = accuracy(self.model, self.global_params, self.val)
        self.prev_asr = attack_success_rate(
            self.model, self.global_params, self.test, cfg.attack,
        )

    def _client_update(self, client: int, round_no: int, is_malicious: bool) -> np.ndarray:
        """Local SGD from the global model; backdoor clients train on poisoned data."""
        data = self.client_data[client]
        feats, labels = data.features, data.labels
        if is_malicious and self.cfg.attack.kind == "backdoor":
            feats, labels = poison_data(
                feats, labels, self.cfg.attack,
                derive_stream(self.seed, "poison", [client, round_no]),
            )
        return local_train(
            self.model, self.global_params, feats, labels, self.cfg.client_train,
            derive_stream(self.seed, "client-batch", [client, round_no]),
        )

    def run_round(self, round_no: int) -> RoundRecord:
        cfg = self.cfg
        roster = select_roster(
            cfg.n_clients, cfg.participants_per_round, self.malicious_ids,
            derive_stream(self.seed, "roster", [round_no]),
        )
        self.rosters.append((round_no, roster.participating))

        updates = {}
        for client in roster.participating:
            updates[client] = self._client_update(
                client, round_no, client in roster.malicious,
            )
        if cfg.attack.kind != "backdoor" and roster.malicious:
            peers = [updates[c] for c in sorted(roster.malicious)]
            for client in roster.malicious:
                updates[client] = poison_update(
                    updates[client], self.global_params, peers, cfg.attack,
                    derive_stream(self.seed, "poison", [client, round_no]),
                )

        update_list = [updates[c] for c in roster.participating]
        mean_delta = round_mean_delta(update_list, self.global_params)
        val_acc_global = accuracy(self.model, self.global_params, self.val)
        weights = (cfg.signals.w_dir, cfg.signals.w_mag, cfg.signals.w_val)

        states, scores_by_client, observations = [], {}, {}
        for client in roster.participating:
            u = updates[client]
            obs = ClientObservation(
                directional=directional_alignment(u, self.global_params, mean_delta),
                magnitude=magnitude_deviation(u, update_list, self.global_params),
                validation=accuracy(self.model, u, self.val) - val_acc_global,
            )
            obs = apply_budget(obs, cfg.signal_budget)
            scores = fuse_scores(obs, weights, cfg.signals.val_scale)
            observations[client] = obs
            scores_by_client[client] = scores
            self.belief.p_malicious[client] = bayes_update(
                self.belief.p_malicious[client], scores.anomaly, cfg.trust,
            )
            states.append(encode_state(
                obs, self.belief.p_malicious[client], self.trust.ts[client],
            ))

        actions = run_agent_round(
            self.agent, states, derive_stream(self.seed, "explore", [round_no]),
        )

        if not cfg.freeze_trust:
            for client, action in zip(roster.participating, actions):
                s = scores_by_client[client]
                after = trust_update(
                    self.trust.ts[client], s.anomaly, s.contribution, cfg.trust,
                )
                self.trust.ts[client] = trust_map(
                    self.belief.p_malicious[client], after, action, cfg.trust,
                )

        self.global_params = aggregate(
            [(c, updates[c], len(self.client_data[c])) for c in roster.participating],
            self.trust.ts, renormalize=cfg.renormalize_aggregation,
        )

        test_acc = accuracy(self.model, self.global_params, self.test)
        asr = attack_success_rate(self.model, self.global_params, self.test, cfg.attack)
        val_acc = accuracy(self.model, self.global_params, self.val)
        try:
            auc = roc_auc(
                [self.belief.p_malicious[c] for c in roster.participating],
                [c in roster.malicious for c in roster.participating],
            )
        except ValueError:
            auc = None
        conf, correct = confidence_correct(self.model, self.global_params, self.test)
        calibration = ece(conf, correct)

        is_mal = [c in roster.malicious for c in roster.participating]
        tau_a, cost = reward_components(actions, is_mal)
        reward = compute_reward(
            val_acc - self.prev_val_acc, tau_a, cost, asr - self.prev_asr,
            cfg.reward_weights,
        )
        self.prev_val_acc = val_acc
        self.prev_asr = asr

        for state, action, client in zip(states, actions, roster.participating):
            if client in self.pending:
                s0, a0, r0 = self.pending[client]
                self.agent.observe_transition(
                    Transition(s0, a0, r0, next_state=state, terminal=False),
                )
            self.pending[client] = (state, action, reward)
        episode = [(s, a, reward) for s, a in zip(states, actions)]
        self.agent.end_round(episode, derive_stream(self.seed, "learn", [round_no]))

        self.trust.record(round_no)
        self.belief.record(round_no)
        record = RoundRecord(
            round=round_no,
            accuracy=test_acc,
            asr=asr,
            roc_auc=auc,
            ece=calibration,
            reward=reward,
            per_client_trust=self.trust.ts.tolist(),
            per_client_belief=self.belief.p_malicious.tolist(),
        )
        self.records.append(record)
        return record

    def _flush_pending(self) -> None:
        zero = np.zeros(len(next(iter(self.pending.values()))[0])) if self.pending else None
        for client in sorted(self.pending):
            s0, a0, r0 = self.pending[client]
            self.agent.observe_transition(
                Transition(s0, a0, r0, next_state=zero, terminal=True),
            )
        self.pending.clear()

    def _pooled_auc(self) -> float | None:
        scores, labels = [], []
        for (round_no, participating), record in zip(self.rosters, self.records):
            for client in participating:
                scores.append(record.per_client_belief[client])
                labels.append(client in self.malicious_ids)
        try:
            return roc_auc(scores, labels)
        except ValueError:
            return None

    def run(self) -> SimResult:
        for round_no in range(1, self.cfg.rounds + 1):
            self.run_round(round_no)
        self._flush_pending()
        return SimResult(
            config=self.cfg,
            seed=self.seed,
            records=self.records,
            trust_history=self.trust.history,
            belief_history=self.belief.history,
            rosters=self.rosters,
            malicious_ids=self.malicious_ids,
            convergence=convergence_round([r.accuracy for r in self.records]),
            pooled_auc=self._pooled_auc(),
            agent=self.agent,
        )


def run_simulation(cfg: SimConfig, seed: int | None = None) -> SimResult:
    """Run one full deterministic simulation under the given config."""
    return Simulation(cfg, seed).run()
