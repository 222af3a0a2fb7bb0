"""Seeded episode generator the recovery agent trains against.

Each episode overlays one anomaly on a healthy workload trace. While the
anomaly is active it inflates latency (and resource usage); recovery actions
either clear it, mitigate it, or waste their cost, with effects depending on
the anomaly kind. The per-tick training reward compares the actual snapshot
against the healthy-baseline counterfactual, so enduring an anomaly and
over-acting are both penalized.

Load-level thresholds come from the 33rd/66th qps percentiles of a reference
trace of the same pattern.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..seeding import derive_seed
from ..simulator import WorkloadPattern, default_patterns, generate_trace
from ..simulator.telemetry import clamp_metric
from .objectives import EpisodeTrace, ObjectiveVector
from .states import (
    DEFAULT_ACTION_COSTS,
    RecoveryAction,
    SystemState,
    failed_bin,
)

# Actions that fully clear an active anomaly, per kind.
CLEARING_ACTIONS = {
    "cpu": {RecoveryAction.SCALE_UP, RecoveryAction.RESTART_COMPONENT},
    "memory": {RecoveryAction.RESTART_COMPONENT},
    "lock": {RecoveryAction.REROUTE_QUERY, RecoveryAction.RESTART_COMPONENT},
    "io": {RecoveryAction.REBUILD_INDEX, RecoveryAction.RESTART_COMPONENT},
    "cascade": {RecoveryAction.RESTART_COMPONENT},
}

# Actions that halve the remaining latency excess while the anomaly persists.
MITIGATING_ACTIONS = {
    "cpu": {RecoveryAction.THROTTLE_ADMISSION},
    "memory": {RecoveryAction.SCALE_UP},
    "lock": {RecoveryAction.THROTTLE_ADMISSION},
    "io": {RecoveryAction.REROUTE_QUERY},
    "cascade": {RecoveryAction.REROUTE_QUERY},
}

_ANOMALY_KINDS = ("cpu", "memory", "lock", "io", "cascade")

_LATENCY_INFLATION = 3.0
_ANOMALY_RESOURCE_BOOST = {"cpu": 0.3, "memory": 0.3, "lock": 0.1, "io": 0.15, "cascade": 0.2}
_RESTART_HICCUP = 1.8  # one-tick latency multiplier after a restart
_SCALE_UP_RESOURCE = 0.08
_MAX_SCALE_UPS = 3
_SCALE_DOWN_RESOURCE = 0.06
_SCALE_DOWN_LATENCY = 1.08
_MAX_SCALE_DOWNS = 2
_THROTTLE_LATENCY = 0.92  # while throttled; throttling again has no extra effect
_THROTTLE_QPS = 0.75
_CASCADE_GROWTH = 0.08
_CASCADE_CAP = 0.6

# How an active anomaly shows up in sampled telemetry, mirroring the trace
# simulator's injected-anomaly signatures.
_OBSERVED_METRICS = {
    "cpu": ("cpu",),
    "memory": ("memory",),
    "lock": ("latency_ms",),
    "io": ("io_ops", "latency_ms"),
    "cascade": ("latency_ms",),
}
_OBSERVED_INFLATION = 2.8


class RecoveryEnv:
    """Deterministic anomaly-and-recovery episodes over a workload pattern."""

    def __init__(
        self,
        pattern: WorkloadPattern | None = None,
        episode_ticks: int = 40,
        onset_range: tuple[int, int] = (5, 12),
        action_costs: dict[RecoveryAction, float] | None = None,
        seed: int = 0,
    ):
        if episode_ticks < 2:
            raise InputError("episodes need at least 2 ticks")
        if not 1 <= onset_range[0] <= onset_range[1] < episode_ticks:
            raise InputError(
                f"onset range {onset_range} must lie within [1, {episode_ticks})"
            )
        if pattern is None:
            pattern = default_patterns(1, seed=derive_seed(seed, "env-pattern"))[0]
        self.pattern = WorkloadPattern(
            pattern_id=pattern.pattern_id,
            base_rates=pattern.base_rates,
            diurnal_amplitude=pattern.diurnal_amplitude,
            noise_std=pattern.noise_std,
            anomaly_rate=0.0,
        )
        self.episode_ticks = episode_ticks
        self.onset_range = onset_range
        self.action_costs = dict(DEFAULT_ACTION_COSTS)
        if action_costs:
            self.action_costs.update(action_costs)
        reference = generate_trace(
            self.pattern, derive_seed(seed, "load-reference"), 600
        )
        qps = np.array([w.qps for w in reference])
        self._load_cuts = (
            float(np.percentile(qps, 33.0)),
            float(np.percentile(qps, 66.0)),
        )
        self._episode = None

    # -- episode state ---------------------------------------------------

    def reset(self, episode_seed: int) -> SystemState:
        rng = np.random.Generator(np.random.PCG64(derive_seed(episode_seed, "episode")))
        base = generate_trace(
            self.pattern, derive_seed(episode_seed, "base-trace"), self.episode_ticks
        )
        self._episode = {
            "base": base,
            "tick": 0,
            "anomaly_kind": _ANOMALY_KINDS[int(rng.integers(len(_ANOMALY_KINDS)))],
            "onset": int(rng.integers(self.onset_range[0], self.onset_range[1] + 1)),
            "active": False,
            "mitigation": 1.0,  # scales the latency excess while active
            "scale_ups": 0,
            "scale_downs": 0,
            "throttled": False,
            "hiccup": 0.0,
            "failed_fraction": 0.0,
            "cum_cost": 0.0,
        }
        return self._observe()

    def _require_episode(self) -> dict:
        if self._episode is None:
            raise InputError("call reset() before stepping the environment")
        return self._episode

    def _latency_scale(self, ep: dict) -> float:
        scale = _SCALE_DOWN_LATENCY ** ep["scale_downs"]
        if ep["throttled"]:
            scale *= _THROTTLE_LATENCY
        return scale

    def _resource_shift(self, ep: dict) -> float:
        return (
            _SCALE_UP_RESOURCE * ep["scale_ups"]
            - _SCALE_DOWN_RESOURCE * ep["scale_downs"]
        )

    def _baseline_latency(self, tick: int) -> float:
        ep = self._require_episode()
        return ep["base"][tick].latency_ms * self._latency_scale(ep)

    def _latency(self, tick: int) -> float:
        ep = self._require_episode()
        value = self._baseline_latency(tick)
        if ep["active"]:
            value *= 1.0 + (_LATENCY_INFLATION - 1.0) * ep["mitigation"]
        if ep["hiccup"] > 0:
            value *= _RESTART_HICCUP
        return value

    def _resource(self, tick: int) -> float:
        ep = self._require_episode()
        window = ep["base"][tick]
        value = 0.5 * (window.cpu + window.memory) + self._resource_shift(ep)
        if ep["active"]:
            value += _ANOMALY_RESOURCE_BOOST[ep["anomaly_kind"]]
        return float(np.clip(value, 0.0, 1.0))

    def _observe(self) -> SystemState:
        ep = self._require_episode()
        tick = ep["tick"]
        qps = ep["base"][tick].qps * (_THROTTLE_QPS if ep["throttled"] else 1.0)
        if qps <= self._load_cuts[0]:
            load = "low"
        elif qps <= self._load_cuts[1]:
            load = "medium"
        else:
            load = "high"
        return SystemState(
            load_level=load,
            anomaly_status=ep["anomaly_kind"] if ep["active"] else "none",
            failed=failed_bin(ep["failed_fraction"]),
        )

    def snapshot(self) -> ObjectiveVector:
        """Instantaneous (latency, resource, cumulative cost) at the current tick."""
        ep = self._require_episode()
        tick = ep["tick"]
        return ObjectiveVector(self._latency(tick), self._resource(tick), ep["cum_cost"])

    def current_metrics(self) -> dict[str, float]:
        """The five telemetry metrics a monitor would sample right now.

        While an anomaly is active, the metrics matching its kind are inflated
        the same way the trace simulator's injected anomalies inflate them, so
        a detector trained on simulated traces sees in-distribution windows.
        """
        ep = self._require_episode()
        tick = ep["tick"]
        window = ep["base"][tick]
        values = {
            "cpu": window.cpu,
            "memory": window.memory,
            "latency_ms": window.latency_ms * self._latency_scale(ep),
            "io_ops": window.io_ops,
            "qps": window.qps * (_THROTTLE_QPS if ep["throttled"] else 1.0),
        }
        if ep["active"]:
            inflation = 1.0 + (_OBSERVED_INFLATION - 1.0) * ep["mitigation"]
            for metric in _OBSERVED_METRICS[ep["anomaly_kind"]]:
                values[metric] = clamp_metric(metric, values[metric] * inflation)
        if ep["hiccup"] > 0:
            values["latency_ms"] *= _RESTART_HICCUP
        return values

    def true_anomaly_kind(self) -> str | None:
        """Ground-truth active anomaly kind, for evaluation harnesses."""
        ep = self._require_episode()
        return ep["anomaly_kind"] if ep["active"] else None

    def episode_anomaly(self) -> tuple[str, int]:
        """This episode's (anomaly kind, onset tick), active or not."""
        ep = self._require_episode()
        return ep["anomaly_kind"], ep["onset"]

    def baseline_snapshot(self) -> ObjectiveVector:
        """The healthy counterfactual at the current tick (no anomaly, no cost)."""
        ep = self._require_episode()
        tick = ep["tick"]
        window = ep["base"][tick]
        return ObjectiveVector(
            self._baseline_latency(tick),
            float(
                np.clip(0.5 * (window.cpu + window.memory) + self._resource_shift(ep), 0, 1)
            ),
            0.0,
        )

    def step(self, action: RecoveryAction) -> tuple[SystemState, bool]:
        """Apply the action, advance one tick; returns (state, done)."""
        ep = self._require_episode()
        if ep["tick"] >= self.episode_ticks - 1:
            raise InputError("episode finished; call reset() to start another")
        kind = ep["anomaly_kind"]
        ep["cum_cost"] += self.action_costs[action]
        ep["hiccup"] = max(0.0, ep["hiccup"] - 1.0)

        if action is RecoveryAction.SCALE_UP:
            ep["scale_ups"] = min(_MAX_SCALE_UPS, ep["scale_ups"] + 1)
        elif action is RecoveryAction.SCALE_DOWN:
            ep["scale_downs"] = min(_MAX_SCALE_DOWNS, ep["scale_downs"] + 1)
        elif action is RecoveryAction.THROTTLE_ADMISSION:
            ep["throttled"] = True
        if action is RecoveryAction.RESTART_COMPONENT:
            ep["hiccup"] = 1.0

        if ep["active"]:
            if action in CLEARING_ACTIONS[kind]:
                ep["active"] = False
                ep["failed_fraction"] = 0.0
            elif action in MITIGATING_ACTIONS[kind]:
                ep["mitigation"] *= 0.5

        ep["tick"] += 1
        tick = ep["tick"]
        if not ep["active"] and tick == ep["onset"]:
            ep["active"] = True
            ep["mitigation"] = 1.0
        if ep["active"] and kind == "cascade":
            ep["failed_fraction"] = min(_CASCADE_CAP, ep["failed_fraction"] + _CASCADE_GROWTH)

        done = tick >= self.episode_ticks - 1
        return self._observe(), done


def rollout(env: RecoveryEnv, choose, episode_seed: int) -> EpisodeTrace:
    """Run one episode with `choose(state, tick) -> RecoveryAction`."""
    state = env.reset(episode_seed)
    latencies = [env.snapshot().latency]
    resources = [env.snapshot().resource]
    action_costs: list[float] = []
    tick = 0
    done = False
    while not done:
        action = choose(state, tick)
        action_costs.append(env.action_costs[action])
        state, done = env.step(action)
        snap = env.snapshot()
        latencies.append(snap.latency)
        resources.append(snap.resource)
        tick += 1
    return EpisodeTrace(
        latencies=np.array(latencies),
        resources=np.array(resources),
        action_costs=action_costs,
    )
