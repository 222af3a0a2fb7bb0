"""Discretized system states and the recovery action set."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import InputError

LOAD_LEVELS = ("low", "medium", "high")
ANOMALY_STATUSES = ("none", "cpu", "memory", "lock", "io", "cascade")
# failed-fraction bins: exactly 0, (0, 0.25], (0.25, 0.5], > 0.5
FAILED_BINS = ("none", "low", "medium", "high")

N_STATES = len(LOAD_LEVELS) * len(ANOMALY_STATUSES) * len(FAILED_BINS)  # 72


class RecoveryAction(Enum):
    """Recovery measures, ordered; the ordinal breaks Q-value ties."""

    NO_OP = 0
    REROUTE_QUERY = 1
    SCALE_UP = 2
    SCALE_DOWN = 3
    RESTART_COMPONENT = 4
    REBUILD_INDEX = 5
    THROTTLE_ADMISSION = 6


ACTIONS = tuple(RecoveryAction)
N_ACTIONS = len(ACTIONS)

DEFAULT_ACTION_COSTS = {
    RecoveryAction.NO_OP: 0.0,
    RecoveryAction.REROUTE_QUERY: 1.0,
    RecoveryAction.SCALE_UP: 5.0,
    RecoveryAction.SCALE_DOWN: 1.0,
    RecoveryAction.RESTART_COMPONENT: 8.0,
    RecoveryAction.REBUILD_INDEX: 10.0,
    RecoveryAction.THROTTLE_ADMISSION: 2.0,
}


def failed_bin(fraction: float) -> str:
    if fraction < 0 or fraction > 1:
        raise InputError(f"failed fraction must be in [0, 1], got {fraction}")
    if fraction == 0.0:
        return "none"
    if fraction <= 0.25:
        return "low"
    if fraction <= 0.5:
        return "medium"
    return "high"


@dataclass(frozen=True)
class SystemState:
    """One cell of the 3 x 6 x 4 discretized state space."""

    load_level: str
    anomaly_status: str
    failed: str = "none"

    def __post_init__(self):
        if self.load_level not in LOAD_LEVELS:
            raise InputError(f"unknown load level '{self.load_level}'")
        if self.anomaly_status not in ANOMALY_STATUSES:
            raise InputError(f"unknown anomaly status '{self.anomaly_status}'")
        if self.failed not in FAILED_BINS:
            raise InputError(f"unknown failed bin '{self.failed}'")

    def index(self) -> int:
        return (
            LOAD_LEVELS.index(self.load_level) * len(ANOMALY_STATUSES) * len(FAILED_BINS)
            + ANOMALY_STATUSES.index(self.anomaly_status) * len(FAILED_BINS)
            + FAILED_BINS.index(self.failed)
        )

    @staticmethod
    def from_index(index: int) -> "SystemState":
        if not 0 <= index < N_STATES:
            raise InputError(f"state index {index} outside [0, {N_STATES})")
        load, rest = divmod(index, len(ANOMALY_STATUSES) * len(FAILED_BINS))
        anomaly, failed = divmod(rest, len(FAILED_BINS))
        return SystemState(
            load_level=LOAD_LEVELS[load],
            anomaly_status=ANOMALY_STATUSES[anomaly],
            failed=FAILED_BINS[failed],
        )
