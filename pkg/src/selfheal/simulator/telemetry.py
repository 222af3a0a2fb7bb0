"""Synthetic database workload telemetry.

Traces are sequences of fixed-width metric windows (cpu, memory, latency,
I/O, query rate) following a diurnal base pattern with Gaussian noise.
Anomalies are injected as multiplicative bursts over an interval, which also
sets the window labels. Everything is a pure function of (inputs, seed).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError, RowError, SchemaError

METRICS = ("cpu", "memory", "latency_ms", "io_ops", "qps")

# (low, high) clamp bounds per metric; None means unbounded above.
METRIC_BOUNDS = {
    "cpu": (0.0, 1.0),
    "memory": (0.0, 1.0),
    "latency_ms": (0.0, None),
    "io_ops": (0.0, None),
    "qps": (0.0, None),
}

ANOMALY_KINDS = (
    "cpu_spike",
    "memory_leak",
    "lock_contention",
    "io_saturation",
    "cascade_seed",
)

# Metrics an anomaly kind multiplies while active.
AFFECTED_METRICS = {
    "cpu_spike": ("cpu",),
    "memory_leak": ("memory",),
    "lock_contention": ("latency_ms",),
    "io_saturation": ("io_ops", "latency_ms"),
    "cascade_seed": ("latency_ms",),
}

DIURNAL_PERIOD = 288  # ticks per simulated day

# Injected event shape when drawing anomalies from a pattern's rate.
_EVENT_DURATION_RANGE = (3, 6)
_EVENT_MAGNITUDE_RANGE = (2.2, 3.5)
_MEAN_EVENT_DURATION = (_EVENT_DURATION_RANGE[0] + _EVENT_DURATION_RANGE[1]) / 2.0


def clamp_metric(metric: str, value: float) -> float:
    low, high = METRIC_BOUNDS[metric]
    if value < low:
        return low
    if high is not None and value > high:
        return high
    return value


@dataclass(frozen=True)
class TelemetryWindow:
    """One tick of workload metrics plus its anomaly label."""

    index: int
    cpu: float
    memory: float
    latency_ms: float
    io_ops: float
    qps: float
    label: int

    def __post_init__(self):
        if self.index < 0:
            raise InputError(f"index must be >= 0, got {self.index}")
        for metric in METRICS:
            value = getattr(self, metric)
            low, high = METRIC_BOUNDS[metric]
            if value < low or (high is not None and value > high):
                raise InputError(f"{metric}={value} outside [{low}, {high}]")
        if self.label not in (0, 1):
            raise InputError(f"label must be 0 or 1, got {self.label}")

    def metrics(self) -> tuple[float, float, float, float, float]:
        return (self.cpu, self.memory, self.latency_ms, self.io_ops, self.qps)

    def replace_metrics(self, values: dict[str, float], label: int) -> "TelemetryWindow":
        fields = {m: getattr(self, m) for m in METRICS}
        fields.update(values)
        return TelemetryWindow(index=self.index, label=label, **fields)


@dataclass(frozen=True)
class WorkloadPattern:
    """Parametric workload: per-metric base rate, diurnal swing, and noise."""

    pattern_id: str
    base_rates: dict[str, float]
    diurnal_amplitude: dict[str, float]
    noise_std: dict[str, float]
    anomaly_rate: float = 0.05

    def __post_init__(self):
        for name, table in (
            ("base_rates", self.base_rates),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("noise_std", self.noise_std),
        ):
            missing = [m for m in METRICS if m not in table]
            if missing:
                raise InputError(f"{name} missing metrics: {missing}")
        if any(self.noise_std[m] < 0 for m in METRICS):
            raise InputError("noise_std must be >= 0")
        if not 0.0 <= self.anomaly_rate <= 0.5:
            raise InputError(
                f"anomaly_rate must be in [0, 0.5], got {self.anomaly_rate}"
            )


@dataclass(frozen=True)
class AnomalyEvent:
    """A burst that multiplies some metrics over [onset, onset + duration)."""

    kind: str
    onset: int
    duration: int
    magnitude: float
    origin_node: str | None = None

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise InputError(f"unknown anomaly kind '{self.kind}'")
        if self.duration < 1:
            raise InputError(f"duration must be >= 1, got {self.duration}")
        if self.magnitude <= 1.0:
            raise InputError(f"magnitude must be > 1, got {self.magnitude}")
        if self.kind == "cascade_seed" and self.origin_node is None:
            raise InputError("cascade_seed events need an origin_node")


def default_patterns(count: int, seed: int, anomaly_rate: float = 0.05) -> list[WorkloadPattern]:
    """A family of distinct but related workload patterns.

    Base rates and swing vary per pattern so tasks built from them are
    genuinely different classification problems.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    patterns = []
    for i in range(count):
        base = {
            "cpu": float(rng.uniform(0.18, 0.32)),
            "memory": float(rng.uniform(0.3, 0.45)),
            "latency_ms": float(rng.uniform(15.0, 25.0)),
            "io_ops": float(rng.uniform(100.0, 200.0)),
            "qps": float(rng.uniform(150.0, 400.0)),
        }
        amplitude = {m: base[m] * float(rng.uniform(0.05, 0.15)) for m in METRICS}
        noise = {m: base[m] * float(rng.uniform(0.01, 0.03)) for m in METRICS}
        patterns.append(
            WorkloadPattern(
                pattern_id=f"pattern-{i}",
                base_rates=base,
                diurnal_amplitude=amplitude,
                noise_std=noise,
                anomaly_rate=anomaly_rate,
            )
        )
    return patterns


def generate_trace(
    pattern: WorkloadPattern, seed: int, ticks: int
) -> list[TelemetryWindow]:
    """Simulate `ticks` windows of the pattern, anomalies included.

    Metrics follow base + diurnal sinusoid + Gaussian noise, clamped to their
    ranges. Anomaly onsets are Bernoulli draws tuned so the expected fraction
    of anomalous ticks matches the pattern's anomaly_rate; each onset becomes
    an AnomalyEvent realized via inject_anomaly.
    """
    if ticks < 1:
        raise InputError(f"ticks must be >= 1, got {ticks}")
    rng = np.random.Generator(np.random.PCG64(seed))

    t = np.arange(ticks)
    phase = np.sin(2.0 * math.pi * t / DIURNAL_PERIOD)
    series = {}
    for metric in METRICS:
        raw = (
            pattern.base_rates[metric]
            + pattern.diurnal_amplitude[metric] * phase
            + rng.normal(0.0, pattern.noise_std[metric], size=ticks)
        )
        low, high = METRIC_BOUNDS[metric]
        series[metric] = np.clip(raw, low, high)

    windows = [
        TelemetryWindow(
            index=int(i),
            cpu=float(series["cpu"][i]),
            memory=float(series["memory"][i]),
            latency_ms=float(series["latency_ms"][i]),
            io_ops=float(series["io_ops"][i]),
            qps=float(series["qps"][i]),
            label=0,
        )
        for i in range(ticks)
    ]

    onset_prob = pattern.anomaly_rate / _MEAN_EVENT_DURATION
    injectable = [k for k in ANOMALY_KINDS if k != "cascade_seed"]
    for tick in range(ticks):
        if rng.random() >= onset_prob:
            continue
        duration = int(rng.integers(_EVENT_DURATION_RANGE[0], _EVENT_DURATION_RANGE[1] + 1))
        duration = min(duration, ticks - tick)
        event = AnomalyEvent(
            kind=injectable[int(rng.integers(len(injectable)))],
            onset=tick,
            duration=duration,
            magnitude=float(rng.uniform(*_EVENT_MAGNITUDE_RANGE)),
        )
        windows = inject_anomaly(windows, event)
    return windows


def inject_anomaly(
    trace: list[TelemetryWindow], event: AnomalyEvent
) -> list[TelemetryWindow]:
    """Return a copy of the trace with the event applied.

    Affected metrics are multiplied by the event magnitude (then clamped);
    labels over [onset, onset + duration) become 1. Other ticks are shared
    untouched.
    """
    if event.onset < 0 or event.onset + event.duration > len(trace):
        raise InputError(
            f"event [{event.onset}, {event.onset + event.duration}) does not fit "
            f"a trace of {len(trace)} ticks"
        )
    affected = AFFECTED_METRICS[event.kind]
    out = list(trace)
    for tick in range(event.onset, event.onset + event.duration):
        window = out[tick]
        changes = {
            m: clamp_metric(m, getattr(window, m) * event.magnitude)
            for m in affected
        }
        out[tick] = window.replace_metrics(changes, label=1)
    return out


CSV_COLUMNS = ("tick", "cpu", "memory", "latency_ms", "io_ops", "qps", "label")

_SCHEMA_TARGETS = METRICS + ("label",)


@dataclass
class CsvIngest:
    """Ingestion result: parsed windows plus the per-metric clamp report."""

    windows: list[TelemetryWindow]
    clamp_counts: dict[str, int] = field(default_factory=dict)


def ingest_csv(path: str | Path, schema_map: dict[str, str]) -> CsvIngest:
    """Read a UTF-8, comma-separated, headered telemetry file.

    `schema_map` maps column names to metric names (plus "label"); it must
    cover all five metrics and the label. Columns not named in the map are
    ignored; ticks are row order. Out-of-range values are clamped and
    counted.
    """
    targets = set(schema_map.values())
    missing_targets = [t for t in _SCHEMA_TARGETS if t not in targets]
    if missing_targets:
        raise SchemaError(f"schema map does not cover: {missing_targets}")
    unknown = sorted(targets - set(_SCHEMA_TARGETS))
    if unknown:
        raise SchemaError(f"schema map names unknown metrics: {unknown}")

    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        missing_cols = [c for c in schema_map if c not in header]
        if missing_cols:
            raise SchemaError(f"{path}: missing columns: {missing_cols}")
        positions = {schema_map[c]: header.index(c) for c in schema_map}

        windows: list[TelemetryWindow] = []
        clamp_counts = {m: 0 for m in METRICS}
        for line, row in enumerate(reader, start=2):
            values: dict[str, float] = {}
            for metric in METRICS:
                cell = row[positions[metric]] if positions[metric] < len(row) else ""
                try:
                    raw = float(cell)
                except ValueError:
                    raise RowError(
                        f"cannot parse {metric} cell {cell!r}", line
                    ) from None
                clamped = clamp_metric(metric, raw)
                if clamped != raw:
                    clamp_counts[metric] += 1
                values[metric] = clamped
            cell = row[positions["label"]] if positions["label"] < len(row) else ""
            try:
                label = int(float(cell))
            except ValueError:
                raise RowError(f"cannot parse label cell {cell!r}", line) from None
            if label not in (0, 1):
                raise RowError(f"label must be 0 or 1, got {label}", line)
            windows.append(TelemetryWindow(index=len(windows), label=label, **values))
    return CsvIngest(windows=windows, clamp_counts=clamp_counts)


def export_csv(trace: list[TelemetryWindow], path: str | Path) -> None:
    """Write a trace in the canonical CSV schema with 6 significant digits."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for window in trace:
            writer.writerow(
                [window.index]
                + [format(getattr(window, m), ".6g") for m in METRICS]
                + [window.label]
            )
