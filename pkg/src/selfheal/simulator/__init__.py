"""Deterministic workload, anomaly, cascade, and task generation."""

from .cascade import (
    NODE_KINDS,
    CascadeTrace,
    ComponentGraph,
    GraphEdge,
    GraphNode,
    make_dependency_graph,
    propagate_cascade,
)
from .tasks import (
    FEATURE_UNIT_SCALE,
    Task,
    augment_tasks,
    make_tasks,
    trace_windows,
    window_feature,
    window_label,
)
from .telemetry import (
    AFFECTED_METRICS,
    ANOMALY_KINDS,
    CSV_COLUMNS,
    METRIC_BOUNDS,
    METRICS,
    AnomalyEvent,
    CsvIngest,
    TelemetryWindow,
    WorkloadPattern,
    default_patterns,
    export_csv,
    generate_trace,
    ingest_csv,
    inject_anomaly,
)

__all__ = [
    "AFFECTED_METRICS",
    "ANOMALY_KINDS",
    "CSV_COLUMNS",
    "FEATURE_UNIT_SCALE",
    "METRICS",
    "METRIC_BOUNDS",
    "NODE_KINDS",
    "AnomalyEvent",
    "CascadeTrace",
    "ComponentGraph",
    "CsvIngest",
    "GraphEdge",
    "GraphNode",
    "Task",
    "TelemetryWindow",
    "WorkloadPattern",
    "augment_tasks",
    "default_patterns",
    "export_csv",
    "generate_trace",
    "ingest_csv",
    "inject_anomaly",
    "make_dependency_graph",
    "make_tasks",
    "propagate_cascade",
    "trace_windows",
    "window_feature",
    "window_label",
]
