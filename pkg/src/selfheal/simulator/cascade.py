"""Dependency graphs and cascading-failure dynamics.

An edge (u -> v) means v depends on u; failures flow along edge direction.
Propagation follows a discrete-time weighted linear-threshold rule: a healthy
node fails once the weight of its failed dependencies reaches a fraction
`fail_threshold` of its total in-weight. Each node also carries a telemetry
series that degrades (latency up, qps down) after the node's failure tick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .telemetry import METRICS

NODE_KINDS = ("query", "table", "index", "connection_pool", "disk")

# Healthy per-metric telemetry ranges by node kind: (cpu, memory, latency_ms,
# io_ops, qps) midpoints; actual levels are seeded around these.
_BASE_LEVELS = {
    "query": (0.30, 0.35, 18.0, 120.0, 300.0),
    "table": (0.20, 0.45, 12.0, 180.0, 200.0),
    "index": (0.15, 0.30, 8.0, 150.0, 250.0),
    "connection_pool": (0.25, 0.25, 10.0, 60.0, 350.0),
    "disk": (0.35, 0.20, 22.0, 260.0, 150.0),
}

# Multipliers applied to a node's metrics from its failure tick onward.
_FAILURE_EFFECT = {"cpu": 1.3, "memory": 1.2, "latency_ms": 4.0, "io_ops": 0.5, "qps": 0.2}


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: str
    static_features: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise InputError(f"unknown node kind '{self.kind}'")


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    weight: float

    def __post_init__(self):
        if self.src == self.dst:
            raise InputError(f"self-edge on '{self.src}' not allowed")
        if not 0.0 < self.weight <= 1.0:
            raise InputError(f"edge weight must be in (0, 1], got {self.weight}")


class ComponentGraph:
    """Typed components with weighted directed dependency edges."""

    def __init__(self, nodes, edges):
        self.nodes: tuple[GraphNode, ...] = tuple(
            n if isinstance(n, GraphNode) else GraphNode(*n) for n in nodes
        )
        self.edges: tuple[GraphEdge, ...] = tuple(
            e if isinstance(e, GraphEdge) else GraphEdge(*e) for e in edges
        )
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InputError("node ids must be unique")
        self._index = {n.id: i for i, n in enumerate(self.nodes)}
        for e in self.edges:
            if e.src not in self._index or e.dst not in self._index:
                raise InputError(f"edge {e.src}->{e.dst} references unknown node")
        widths = {len(n.static_features) for n in self.nodes}
        if len(widths) > 1:
            raise InputError("static feature widths differ across nodes")

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise InputError(f"unknown node '{node_id}'") from None

    def in_edges(self, node_id: str) -> list[GraphEdge]:
        return [e for e in self.edges if e.dst == node_id]

    def in_adjacency(self, self_loops: bool = True) -> np.ndarray:
        """A[v, u] = 1 where u is an in-neighbor of v (optionally plus v itself)."""
        n = len(self.nodes)
        a = np.eye(n) if self_loops else np.zeros((n, n))
        for e in self.edges:
            a[self._index[e.dst], self._index[e.src]] = 1.0
        return a

    def __eq__(self, other):
        if not isinstance(other, ComponentGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges


@dataclass
class CascadeTrace:
    """One simulated cascade: who failed when, and what telemetry showed."""

    graph: ComponentGraph
    seed_node: str
    onset: int
    failure_times: dict[str, int | None]
    node_telemetry: dict[str, np.ndarray]  # (ticks, 5) in METRICS order

    @property
    def ticks(self) -> int:
        return next(iter(self.node_telemetry.values())).shape[0]

    def metrics_at(self, tick: int) -> dict[str, np.ndarray]:
        return {nid: series[tick] for nid, series in self.node_telemetry.items()}

    def failed_by(self, tick: int) -> set[str]:
        return {
            nid
            for nid, t in self.failure_times.items()
            if t is not None and t <= tick
        }


def propagate_cascade(
    graph: ComponentGraph,
    seed_node: str,
    onset: int,
    horizon: int,
    fail_threshold: float,
    seed: int,
) -> CascadeTrace:
    """Run the linear-threshold cascade over `horizon` ticks.

    The seed fails at `onset`. Each subsequent tick, a healthy node fails when
    the summed weight of its already-failed in-neighbors reaches
    `fail_threshold` of its total in-weight; nodes with no in-neighbors never
    fail by propagation. Failed nodes stay failed and their telemetry degrades
    from the failure tick onward.
    """
    if not 0.0 < fail_threshold <= 1.0:
        raise InputError(f"fail_threshold must be in (0, 1], got {fail_threshold}")
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    if not 0 <= onset < horizon:
        raise InputError(f"onset {onset} outside [0, {horizon})")
    graph.index_of(seed_node)  # raises for unknown ids

    in_weights = {
        n.id: [(e.src, e.weight) for e in graph.in_edges(n.id)] for n in graph.nodes
    }
    failure_times: dict[str, int | None] = {n.id: None for n in graph.nodes}
    failure_times[seed_node] = onset

    for tick in range(onset + 1, horizon):
        failed_before = {
            nid for nid, t in failure_times.items() if t is not None and t < tick
        }
        for node in graph.nodes:
            if failure_times[node.id] is not None:
                continue
            incoming = in_weights[node.id]
            if not incoming:
                continue
            total = sum(w for _, w in incoming)
            failed_weight = sum(w for src, w in incoming if src in failed_before)
            if failed_weight / total >= fail_threshold:
                failure_times[node.id] = tick

    rng = np.random.Generator(np.random.PCG64(seed))
    node_telemetry: dict[str, np.ndarray] = {}
    for node in graph.nodes:
        base = np.array(_BASE_LEVELS[node.kind])
        level = base * rng.uniform(0.85, 1.15, size=5)
        series = level + rng.normal(0.0, 0.02, size=(horizon, 5)) * level
        fail_tick = failure_times[node.id]
        if fail_tick is not None:
            effect = np.array([_FAILURE_EFFECT[m] for m in METRICS])
            series[fail_tick:] *= effect
        series[:, 0] = np.clip(series[:, 0], 0.0, 1.0)
        series[:, 1] = np.clip(series[:, 1], 0.0, 1.0)
        series[:, 2:] = np.maximum(series[:, 2:], 0.0)
        series.flags.writeable = False
        node_telemetry[node.id] = series

    return CascadeTrace(
        graph=graph,
        seed_node=seed_node,
        onset=onset,
        failure_times=failure_times,
        node_telemetry=node_telemetry,
    )


def make_tree_graph(
    n_nodes: int,
    seed: int,
    parent_window: int = 3,
    cross_edge_prob: float = 0.25,
    static_width: int = 2,
) -> ComponentGraph:
    """A deep dependency tree with occasional weak cross edges.

    Each non-root node has one strong parent edge (weight in [0.7, 1.0]) drawn
    from the few preceding nodes, giving real propagation depth. Optional
    cross edges carry small weights ([0.1, 0.25]) so that, at the default 0.5
    threshold, a failed strong parent always triggers the child while a failed
    cross neighbor alone never does.
    """
    if n_nodes < 1:
        raise InputError("need at least one node")
    rng = np.random.Generator(np.random.PCG64(seed))
    nodes = [
        GraphNode(
            id=f"n{i}",
            kind=NODE_KINDS[int(rng.integers(len(NODE_KINDS)))],
            static_features=tuple(
                float(x) for x in rng.uniform(0.25, 1.0, size=static_width)
            ),
        )
        for i in range(n_nodes)
    ]
    edges = []
    for i in range(1, n_nodes):
        lo = max(0, i - parent_window)
        parent = int(rng.integers(lo, i))
        edges.append(
            GraphEdge(src=f"n{parent}", dst=f"n{i}", weight=float(rng.uniform(0.7, 1.0)))
        )
        if i >= 2 and rng.random() < cross_edge_prob:
            other = int(rng.integers(0, i))
            if other != parent:
                edges.append(
                    GraphEdge(
                        src=f"n{other}",
                        dst=f"n{i}",
                        weight=float(rng.uniform(0.1, 0.25)),
                    )
                )
    return ComponentGraph(nodes, edges)


def make_cascade_dataset(
    n_traces: int,
    seed: int,
    n_nodes: int = 10,
    horizon: int = 18,
    fail_threshold: float = 0.5,
) -> list[CascadeTrace]:
    """Seeded suite of cascades over varied tree-like dependency graphs.

    The failing component is drawn from the shallow end of each graph so most
    cascades propagate several hops, while nodes outside the seeded subtree
    supply genuine never-failing examples.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    traces = []
    for _ in range(n_traces):
        graph = make_tree_graph(n_nodes, seed=int(rng.integers(2**63)))
        # seed somewhere shallow that actually has dependents, so the cascade
        # can propagate and early warning is structurally possible
        sources = {e.src for e in graph.edges}
        candidates = [
            nid for nid in graph.node_ids[: min(4, n_nodes)] if nid in sources
        ] or ["n0"]
        seed_node = candidates[int(rng.integers(len(candidates)))]
        onset = int(rng.integers(2, 5))
        traces.append(
            propagate_cascade(
                graph,
                seed_node=seed_node,
                onset=onset,
                horizon=horizon,
                fail_threshold=fail_threshold,
                seed=int(rng.integers(2**63)),
            )
        )
    return traces


def make_dependency_graph(
    n_nodes: int,
    seed: int,
    max_parents: int = 2,
    weight_range: tuple[float, float] = (0.7, 1.0),
    static_width: int = 2,
) -> ComponentGraph:
    """A seeded layered dependency DAG rooted at node 'n0'.

    Every non-root node depends on one or two earlier nodes, so a cascade
    seeded at the root can reach the whole graph when weights clear the
    threshold.
    """
    if n_nodes < 1:
        raise InputError("need at least one node")
    rng = np.random.Generator(np.random.PCG64(seed))
    nodes = [
        GraphNode(
            id=f"n{i}",
            kind=NODE_KINDS[int(rng.integers(len(NODE_KINDS)))],
            static_features=tuple(
                float(x) for x in rng.uniform(0.25, 1.0, size=static_width)
            ),
        )
        for i in range(n_nodes)
    ]
    edges = []
    for i in range(1, n_nodes):
        n_parents = int(rng.integers(1, max_parents + 1))
        parents = rng.choice(i, size=min(n_parents, i), replace=False)
        for p in sorted(int(x) for x in parents):
            edges.append(
                GraphEdge(
                    src=f"n{p}",
                    dst=f"n{i}",
                    weight=float(rng.uniform(*weight_range)),
                )
            )
    return ComponentGraph(nodes, edges)
