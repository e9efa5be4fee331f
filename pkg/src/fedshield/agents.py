"""Defense controllers: DQN, linear Q, policy gradient, and a random baseline.

All controllers share one factorized policy: a single network scores each
client's 8-feature state (three signals, three mask flags, belief, trust) and
picks increase / reduce / hold per client. The exploration step counter
advances once per client decision.

The reward is computed by a simulator-privileged oracle: its trust-accuracy
term uses ground-truth malicious labels, which exist only here and in the
metrics, never in the defender-visible signal/belief/trust pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import DqnConfig, RewardWeights
from .rng import RngStream
from .signals import ClientObservation
from .trust import HOLD, REDUCE

__all__ = [
    "STATE_DIM",
    "N_ACTIONS",
    "Transition",
    "ReplayBuffer",
    "QNet",
    "DqnAgent",
    "LinearQAgent",
    "PolicyGradientAgent",
    "RandomAgent",
    "encode_state",
    "epsilon",
    "run_agent_round",
    "dqn_learn",
    "pg_learn",
    "pg_surrogate_grad",
    "compute_reward",
    "reward_components",
    "make_agent",
    "save_checkpoint",
    "load_checkpoint",
]

STATE_DIM = 8
N_ACTIONS = 3


def encode_state(obs: ClientObservation, belief: float, trust: float) -> np.ndarray:
    """Fixed-order 8-vector: signals, mask flags, belief, current trust."""
    return np.array(
        [
            obs.directional,
            obs.magnitude,
            obs.validation,
            float(obs.mask_dir),
            float(obs.mask_mag),
            float(obs.mask_val),
            float(belief),
            float(trust),
        ],
        dtype=np.float64,
    )


def epsilon(step: int, cfg: DqnConfig) -> float:
    """Linear decay eps_start -> eps_end over eps_decay_steps, then flat."""
    frac = min(step / cfg.eps_decay_steps, 1.0)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """FIFO ring buffer with uniform without-replacement batch sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.buffer: list = []
        self.position = 0

    def push(self, transition: Transition) -> None:
        if len(self.buffer) < self.capacity:
            self.buffer.append(transition)
        else:
            self.buffer[self.position] = transition
        self.position = (self.position + 1) % self.capacity

    def sample(self, batch_size: int, rng: RngStream) -> list:
        idx = rng.choice(len(self.buffer), size=batch_size, replace=False)
        return [self.buffer[i] for i in idx]

    def __len__(self) -> int:
        return len(self.buffer)


class QNet:
    """MLP state -> hidden -> hidden -> Q-values (ReLU hidden, linear output)."""

    def __init__(self, input_dim: int, hidden: int, n_actions: int):
        self.input_dim = input_dim
        self.hidden = hidden
        self.n_actions = n_actions

    @property
    def n_params(self) -> int:
        i, h, o = self.input_dim, self.hidden, self.n_actions
        return i * h + h + h * h + h + h * o + o

    def init_params(self, rng: RngStream) -> np.ndarray:
        i, h, o = self.input_dim, self.hidden, self.n_actions
        params = np.zeros(self.n_params, dtype=np.float64)
        w1, _, w2, _, w3, _ = self.unpack(params)
        w1[:] = rng.uniform(-1, 1, size=(i, h)) * np.sqrt(6.0 / (i + h))
        w2[:] = rng.uniform(-1, 1, size=(h, h)) * np.sqrt(6.0 / (h + h))
        w3[:] = rng.uniform(-1, 1, size=(h, o)) * np.sqrt(6.0 / (h + o))
        return params

    def unpack(self, params: np.ndarray):
        i, h, o = self.input_dim, self.hidden, self.n_actions
        sizes = [i * h, h, h * h, h, h * o, o]
        shapes = [(i, h), (h,), (h, h), (h,), (h, o), (o,)]
        out, start = [], 0
        for size, shape in zip(sizes, shapes):
            out.append(params[start:start + size].reshape(shape))
            start += size
        return tuple(out)

    def _forward_cached(self, params: np.ndarray, x: np.ndarray):
        w1, b1, w2, b2, w3, b3 = self.unpack(params)
        z1 = x @ w1 + b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ w2 + b2
        h2 = np.maximum(z2, 0.0)
        q = h2 @ w3 + b3
        return q, (x, z1, h1, z2, h2)

    def forward(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._forward_cached(params, x)[0]

    def td_grad(self, params: np.ndarray, x: np.ndarray, actions: np.ndarray,
                targets: np.ndarray):
        """Mean squared TD error on the selected actions and its flat gradient."""
        n = x.shape[0]
        q, (xi, z1, h1, z2, h2) = self._forward_cached(params, x)
        rows = np.arange(n)
        err = q[rows, actions] - targets
        loss = float(np.mean(err ** 2))
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * err / n
        w1, _, w2, _, w3, _ = self.unpack(params)
        gw3 = h2.T @ dq
        gb3 = dq.sum(axis=0)
        dh2 = dq @ w3.T
        dh2[z2 <= 0.0] = 0.0
        gw2 = h1.T @ dh2
        gb2 = dh2.sum(axis=0)
        dh1 = dh2 @ w2.T
        dh1[z1 <= 0.0] = 0.0
        gw1 = xi.T @ dh1
        gb1 = dh1.sum(axis=0)
        grad = np.concatenate([g.ravel() for g in (gw1, gb1, gw2, gb2, gw3, gb3)])
        return loss, grad


def _clip_grad(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


class DqnAgent:
    """ε-greedy DQN with experience replay and a frozen target network."""

    kind = "dqn"

    def __init__(self, cfg: DqnConfig, rng: RngStream,
                 state_dim: int = STATE_DIM, n_actions: int = N_ACTIONS):
        self.cfg = cfg
        self.net = QNet(state_dim, cfg.hidden_units, n_actions)
        self.params = self.net.init_params(rng)
        self.target_params = self.params.copy()
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.step = 0
        self.learn_steps = 0

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.net.forward(self.params, state[None, :])[0]

    def select_action(self, state: np.ndarray, rng: RngStream, step: int) -> int:
        if rng.uniform() < epsilon(step, self.cfg):
            return int(rng.integers(0, self.net.n_actions))
        # np.argmax resolves ties toward the lowest action index
        return int(np.argmax(self.q_values(state)))

    def observe_transition(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def learn(self, rng: RngStream):
        """One SGD step on a replayed batch; returns the pre-step loss.

        Skips (returns None) until the buffer holds a full batch. Targets come
        from the frozen target network, refreshed every target_update_every
        learn steps; gradients are clipped to grad_clip_norm.
        """
        if len(self.buffer) < self.cfg.batch_size:
            return None
        batch = self.buffer.sample(self.cfg.batch_size, rng)
        states = np.stack([t.state for t in batch])
        actions = np.array([t.action for t in batch], dtype=np.int64)
        rewards = np.array([t.reward for t in batch], dtype=np.float64)
        next_states = np.stack([t.next_state for t in batch])
        terminal = np.array([t.terminal for t in batch], dtype=bool)
        q_next = self.net.forward(self.target_params, next_states).max(axis=1)
        targets = rewards + np.where(terminal, 0.0, self.cfg.gamma * q_next)
        loss, grad = self.net.td_grad(self.params, states, actions, targets)
        self.params -= self.cfg.learning_rate * _clip_grad(grad, self.cfg.grad_clip_norm)
        self.learn_steps += 1
        if self.learn_steps % self.cfg.target_update_every == 0:
            self.target_params = self.params.copy()
        return loss

    def end_round(self, episode: list, rng: RngStream):
        return self.learn(rng)

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "step": self.step,
            "learn_steps": self.learn_steps,
            "params": self.params.tolist(),
            "target_params": self.target_params.tolist(),
            "buffer_position": self.buffer.position,
            "buffer": [
                [t.state.tolist(), t.action, t.reward, t.next_state.tolist(), t.terminal]
                for t in self.buffer.buffer
            ],
        }

    def load_state_dict(self, state: dict) -> None:
        self.step = int(state["step"])
        self.learn_steps = int(state["learn_steps"])
        self.params = np.array(state["params"], dtype=np.float64)
        self.target_params = np.array(state["target_params"], dtype=np.float64)
        self.buffer.buffer = [
            Transition(np.array(s, dtype=np.float64), int(a), float(r),
                       np.array(ns, dtype=np.float64), bool(term))
            for s, a, r, ns, term in state["buffer"]
        ]
        self.buffer.position = int(state["buffer_position"])


class LinearQAgent:
    """Buffer-free linear Q-learning: one online TD step per closed transition.

    Shares the DQN's ε schedule, discount, and learning rate so the comparison
    isolates function-approximation capacity.
    """

    kind = "linear_q"

    def __init__(self, cfg: DqnConfig, rng: RngStream,
                 state_dim: int = STATE_DIM, n_actions: int = N_ACTIONS):
        self.cfg = cfg
        self.n_actions = n_actions
        self.w = np.zeros((n_actions, state_dim), dtype=np.float64)
        self.b = np.zeros(n_actions, dtype=np.float64)
        self.step = 0

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.w @ state + self.b

    def select_action(self, state: np.ndarray, rng: RngStream, step: int) -> int:
        if rng.uniform() < epsilon(step, self.cfg):
            return int(rng.integers(0, self.n_actions))
        return int(np.argmax(self.q_values(state)))

    def observe_transition(self, t: Transition) -> None:
        q_next = 0.0 if t.terminal else float(np.max(self.q_values(t.next_state)))
        target = t.reward + self.cfg.gamma * q_next
        td = target - float(self.q_values(t.state)[t.action])
        self.w[t.action] += self.cfg.learning_rate * td * t.state
        self.b[t.action] += self.cfg.learning_rate * td

    def end_round(self, episode: list, rng: RngStream):
        return None

    def state_dict(self) -> dict:
        return {"kind": self.kind, "step": self.step,
                "w": self.w.tolist(), "b": self.b.tolist()}

    def load_state_dict(self, state: dict) -> None:
        self.step = int(state["step"])
        self.w = np.array(state["w"], dtype=np.float64)
        self.b = np.array(state["b"], dtype=np.float64)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def pg_surrogate_grad(w: np.ndarray, b: np.ndarray, states: np.ndarray,
                      actions: np.ndarray, advantages: np.ndarray):
    """Surrogate loss -mean(adv * log pi(a|s)) and its gradient wrt (w, b)."""
    n = states.shape[0]
    probs = _softmax(states @ w.T + b)
    rows = np.arange(n)
    logp = np.log(np.maximum(probs[rows, actions], 1e-300))
    loss = float(-np.mean(advantages * logp))
    dz = probs * advantages[:, None]
    dz[rows, actions] -= advantages
    dz /= n
    gw = dz.T @ states
    gb = dz.sum(axis=0)
    return loss, gw, gb


class PolicyGradientAgent:
    """REINFORCE over a linear softmax policy, one update per round-episode.

    Every decision in a round shares the round reward, so a within-episode
    baseline would cancel the learning signal entirely; the baseline is
    instead an EMA of past episode returns (the first episode uses its own
    mean, giving zero advantage there).
    """

    kind = "policy_gradient"

    def __init__(self, cfg: DqnConfig, rng: RngStream,
                 state_dim: int = STATE_DIM, n_actions: int = N_ACTIONS):
        self.cfg = cfg
        self.n_actions = n_actions
        self.w = 0.01 * rng.normal(size=(n_actions, state_dim))
        self.b = np.zeros(n_actions, dtype=np.float64)
        self.baseline = None
        self.baseline_beta = 0.1
        self.step = 0

    def policy(self, state: np.ndarray) -> np.ndarray:
        return _softmax(self.w @ state + self.b)

    def select_action(self, state: np.ndarray, rng: RngStream, step: int) -> int:
        return int(rng.choice(self.n_actions, p=self.policy(state)))

    def observe_transition(self, t: Transition) -> None:
        pass

    def end_round(self, episode: list, rng: RngStream):
        return pg_learn(self, episode, self.cfg.learning_rate)

    def state_dict(self) -> dict:
        return {"kind": self.kind, "step": self.step, "w": self.w.tolist(),
                "b": self.b.tolist(), "baseline": self.baseline}

    def load_state_dict(self, state: dict) -> None:
        self.step = int(state["step"])
        self.w = np.array(state["w"], dtype=np.float64)
        self.b = np.array(state["b"], dtype=np.float64)
        self.baseline = state["baseline"]


def pg_learn(policy: PolicyGradientAgent, episode: list, learning_rate: float):
    """One REINFORCE ascent step from an episode of (state, action, reward).

    Returns in an episode are the per-decision rewards (decisions within a
    round are concurrent, so there is no reward-to-go accumulation across
    clients); advantages subtract the running cross-episode baseline.
    """
    if not episode:
        raise ValueError("empty episode")
    states = np.stack([s for s, _, _ in episode])
    actions = np.array([a for _, a, _ in episode], dtype=np.int64)
    returns = np.array([r for _, _, r in episode], dtype=np.float64)
    baseline = float(np.mean(returns)) if policy.baseline is None else policy.baseline
    advantages = returns - baseline
    loss, gw, gb = pg_surrogate_grad(policy.w, policy.b, states, actions, advantages)
    policy.w -= learning_rate * gw
    policy.b -= learning_rate * gb
    mean_ret = float(np.mean(returns))
    if policy.baseline is None:
        policy.baseline = mean_ret
    else:
        policy.baseline = (1.0 - policy.baseline_beta) * policy.baseline \
            + policy.baseline_beta * mean_ret
    return loss


class RandomAgent:
    kind = "random"

    def __init__(self, cfg: DqnConfig, rng: RngStream,
                 state_dim: int = STATE_DIM, n_actions: int = N_ACTIONS):
        self.n_actions = n_actions
        self.step = 0

    def select_action(self, state: np.ndarray, rng: RngStream, step: int) -> int:
        return int(rng.integers(0, self.n_actions))

    def observe_transition(self, t: Transition) -> None:
        pass

    def end_round(self, episode: list, rng: RngStream):
        return None

    def state_dict(self) -> dict:
        return {"kind": self.kind, "step": self.step}

    def load_state_dict(self, state: dict) -> None:
        self.step = int(state["step"])


_AGENT_CLASSES = {
    "dqn": DqnAgent,
    "linear_q": LinearQAgent,
    "policy_gradient": PolicyGradientAgent,
    "random": RandomAgent,
}


def make_agent(kind: str, cfg: DqnConfig, rng: RngStream):
    try:
        cls = _AGENT_CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown agent kind {kind!r}") from None
    return cls(cfg, rng)


def run_agent_round(agent, states: list, rng: RngStream) -> list:
    """Select one action per client state, advancing the step counter each time."""
    actions = []
    for state in states:
        actions.append(agent.select_action(state, rng, agent.step))
        agent.step += 1
    return actions


def dqn_learn(agent: DqnAgent, rng: RngStream):
    """One replayed TD step (see DqnAgent.learn); None while the buffer fills."""
    return agent.learn(rng)


def compute_reward(acc_delta: float, trust_correctness: float, action_cost: float,
                   asr_delta: float, w: RewardWeights) -> float:
    """Round reward: performance + trust accuracy - action cost - attack gain.

    Accuracy and ASR deltas are scaled to percentage points so the default
    weights are meaningful against them.
    """
    return (
        w.perf * acc_delta * 100.0
        + w.trust * trust_correctness
        - w.cost * action_cost
        - w.attack * asr_delta * 100.0
    )


def reward_components(actions: list, is_malicious: list):
    """Ground-truth reward terms: trust accuracy tau_A and action cost delta_C.

    tau_A = fraction of malicious participants given reduce minus fraction of
    benign participants given reduce (0 for an empty group); delta_C is the
    fraction of non-hold actions. Simulator-privileged: uses true labels.
    """
    mal = [a for a, m in zip(actions, is_malicious) if m]
    ben = [a for a, m in zip(actions, is_malicious) if not m]
    frac_mal = float(np.mean([a == REDUCE for a in mal])) if mal else 0.0
    frac_ben = float(np.mean([a == REDUCE for a in ben])) if ben else 0.0
    cost = float(np.mean([a != HOLD for a in actions])) if actions else 0.0
    return frac_mal - frac_ben, cost


def save_checkpoint(agent, path: str) -> None:
    """Dump the agent's parameters and counters as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(agent.state_dict(), fh)


def load_checkpoint(agent, path: str):
    """Restore a checkpoint into an agent constructed with the same config."""
    with open(path, "r", encoding="utf-8") as fh:
        state = json.load(fh)
    if state.get("kind") != agent.kind:
        raise ValueError(f"checkpoint is for {state.get('kind')!r}, agent is {agent.kind!r}")
    agent.load_state_dict(state)
    return agent
