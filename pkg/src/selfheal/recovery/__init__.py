"""Multi-objective recovery: objectives, Q-learning agent, Pareto analysis."""

from .env import CLEARING_ACTIONS, MITIGATING_ACTIONS, RecoveryEnv, rollout
from .objectives import (
    BALANCED_WEIGHTS,
    EpisodeTrace,
    ObjectiveVector,
    RewardWeights,
    dynamic_weights,
    episode_objectives,
    reward,
    weighted_objective,
)
from .pareto import SweepEntry, SweepResult, pareto_front, weight_sweep
from .qlearning import (
    AgentTrainResult,
    Policy,
    QHyper,
    estimate_normalizers,
    evaluate_policy,
    load_policy,
    no_op_policy,
    random_policy,
    save_policy,
    train_agent,
    zero_policy,
)
from .states import (
    ACTIONS,
    ANOMALY_STATUSES,
    DEFAULT_ACTION_COSTS,
    FAILED_BINS,
    LOAD_LEVELS,
    N_ACTIONS,
    N_STATES,
    RecoveryAction,
    SystemState,
    failed_bin,
)

__all__ = [
    "ACTIONS",
    "ANOMALY_STATUSES",
    "AgentTrainResult",
    "BALANCED_WEIGHTS",
    "CLEARING_ACTIONS",
    "DEFAULT_ACTION_COSTS",
    "EpisodeTrace",
    "FAILED_BINS",
    "LOAD_LEVELS",
    "MITIGATING_ACTIONS",
    "N_ACTIONS",
    "N_STATES",
    "ObjectiveVector",
    "Policy",
    "QHyper",
    "RecoveryAction",
    "RecoveryEnv",
    "RewardWeights",
    "SweepEntry",
    "SweepResult",
    "SystemState",
    "dynamic_weights",
    "episode_objectives",
    "estimate_normalizers",
    "evaluate_policy",
    "failed_bin",
    "load_policy",
    "no_op_policy",
    "pareto_front",
    "random_policy",
    "reward",
    "rollout",
    "save_policy",
    "train_agent",
    "weight_sweep",
    "weighted_objective",
    "zero_policy",
]
