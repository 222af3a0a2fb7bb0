"""Tabular Q-learning over the discretized recovery state space.

The table stays small (72 states x 7 actions) on purpose: every greedy
decision can be audited against brute-force policy enumeration, and training
is bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError, SchemaError
from ..seeding import derive_seed
from .env import RecoveryEnv, rollout
from .objectives import EpisodeTrace, ObjectiveVector, RewardWeights, episode_objectives, reward
from .states import ACTIONS, N_ACTIONS, N_STATES, RecoveryAction, SystemState


@dataclass(frozen=True)
class QHyper:
    gamma: float = 0.95
    lr: float = 0.1
    epsilon_start: float = 0.3
    epsilon_end: float = 0.01

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise InputError("gamma must be in [0, 1]")
        if self.lr <= 0:
            raise InputError("lr must be positive")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise InputError("need 0 <= epsilon_end <= epsilon_start <= 1")

    def epsilon_at(self, episode: int, total: int) -> float:
        if total <= 1:
            return self.epsilon_end
        frac = episode / (total - 1)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class Policy:
    """Full Q table plus the hyperparameters it was trained with."""

    q: np.ndarray  # (N_STATES, N_ACTIONS)
    hyper: QHyper = field(default_factory=QHyper)

    def __post_init__(self):
        if self.q.shape != (N_STATES, N_ACTIONS):
            raise InputError(
                f"Q table must be {(N_STATES, N_ACTIONS)}, got {self.q.shape}"
            )

    def greedy(self, state: SystemState) -> RecoveryAction:
        # np.argmax returns the first maximum: ties break to the lowest ordinal
        return ACTIONS[int(np.argmax(self.q[state.index()]))]

    def choose(self, state: SystemState, tick: int) -> RecoveryAction:
        return self.greedy(state)


def zero_policy(hyper: QHyper | None = None) -> Policy:
    return Policy(q=np.zeros((N_STATES, N_ACTIONS)), hyper=hyper or QHyper())


def random_policy(seed: int):
    """A policy-shaped callable choosing uniformly random actions."""

    def choose(state: SystemState, tick: int) -> RecoveryAction:
        rng = np.random.Generator(
            np.random.PCG64(derive_seed(seed, state.index(), tick))
        )
        return ACTIONS[int(rng.integers(N_ACTIONS))]

    return choose


def no_op_policy(state: SystemState, tick: int) -> RecoveryAction:
    return RecoveryAction.NO_OP


def estimate_normalizers(
    env: RecoveryEnv, episodes: int = 10, seed: int = 0
) -> tuple[float, float, float]:
    """Running means of each objective's magnitude over random-policy warmup."""
    if episodes < 1:
        raise InputError("need at least one warmup episode")
    totals = np.zeros(3)
    for e in range(episodes):
        trace = rollout(env, random_policy(derive_seed(seed, "warmup-pi", e)),
                        derive_seed(seed, "warmup", e))
        vec = episode_objectives(trace)
        totals += np.abs(vec.as_array())
    means = totals / episodes
    return tuple(float(max(m, 1e-9)) for m in means)


def _step_normalizers(
    env: RecoveryEnv, episodes: int = 10, seed: int = 0
) -> tuple[float, float, float]:
    """Per-tick magnitude scales for the TD reward.

    Latency and resource are per-tick quantities already; cost is scaled by
    the mean cost of one action so a single wasted action is visible against
    one tick's latency signal rather than diluted by the episode total.
    """
    episode_scale = estimate_normalizers(env, episodes, seed)
    mean_action_cost = float(np.mean([c for c in env.action_costs.values()]))
    return episode_scale[0], episode_scale[1], max(mean_action_cost, 1e-9)


@dataclass
class AgentTrainResult:
    policy: Policy
    returns: list[float]  # summed per-step reward per episode
    normalizers: tuple[float, float, float]


def train_agent(
    env: RecoveryEnv,
    weights: RewardWeights,
    episodes: int,
    hyper: QHyper | None = None,
    seed: int = 0,
    normalizers: tuple[float, float, float] | None = None,
) -> AgentTrainResult:
    """One-step temporal-difference Q-learning with epsilon-greedy exploration.

    The per-step reward compares the post-action snapshot against the healthy
    baseline counterfactual at the same tick, normalized per objective.
    Deterministic in `seed`.
    """
    if episodes < 1:
        raise InputError("episodes must be >= 1")
    hyper = hyper or QHyper()
    if normalizers is None:
        normalizers = _step_normalizers(env, seed=derive_seed(seed, "norms"))
    q = np.zeros((N_STATES, N_ACTIONS))
    returns: list[float] = []
    for episode in range(episodes):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "explore", episode)))
        epsilon = hyper.epsilon_at(episode, episodes)
        state = env.reset(derive_seed(seed, "episode", episode))
        total = 0.0
        done = False
        while not done:
            s = state.index()
            if rng.random() < epsilon:
                action = ACTIONS[int(rng.integers(N_ACTIONS))]
            else:
                action = ACTIONS[int(np.argmax(q[s]))]
            prev_cost = env.snapshot().cost
            state, done = env.step(action)
            actual = env.snapshot()
            baseline = env.baseline_snapshot()
            step_prev = ObjectiveVector(baseline.latency, baseline.resource, prev_cost)
            r = reward(step_prev, actual, weights, normalizers)
            target = r if done else r + hyper.gamma * float(np.max(q[state.index()]))
            q[s, action.value] += hyper.lr * (target - q[s, action.value])
            total += r
        returns.append(total)
    return AgentTrainResult(policy=Policy(q=q, hyper=hyper), returns=returns,
                            normalizers=normalizers)


def evaluate_policy(
    env: RecoveryEnv, choose, episode_seeds: list[int]
) -> tuple[ObjectiveVector, list[EpisodeTrace]]:
    """Mean episode objectives of a policy over fixed held-out episodes."""
    if not episode_seeds:
        raise InputError("need at least one evaluation episode")
    traces = [rollout(env, choose, s) for s in episode_seeds]
    arrays = np.stack([episode_objectives(t).as_array() for t in traces])
    mean = arrays.mean(axis=0)
    return ObjectiveVector(*[float(v) for v in mean]), traces


def save_policy(policy: Policy, path: str | Path) -> None:
    """Textual table: state index, action name, Q value (exact repr floats)."""
    lines = ["state\taction\tq"]
    for s in range(N_STATES):
        for a in ACTIONS:
            lines.append(f"{s}\t{a.name}\t{float(policy.q[s, a.value])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_policy(path: str | Path, hyper: QHyper | None = None) -> Policy:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0].split("\t") != ["state", "action", "q"]:
        raise SchemaError(f"{path}: not a policy table")
    q = np.zeros((N_STATES, N_ACTIONS))
    seen = np.zeros((N_STATES, N_ACTIONS), dtype=bool)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise SchemaError(f"{path}: line {i} is not 'state\\taction\\tq'")
        s = int(parts[0])
        action = RecoveryAction[parts[1]]
        q[s, action.value] = float(parts[2])
        seen[s, action.value] = True
    if not seen.all():
        raise SchemaError(f"{path}: table does not cover every (state, action)")
    return Policy(q=q, hyper=hyper or QHyper())
