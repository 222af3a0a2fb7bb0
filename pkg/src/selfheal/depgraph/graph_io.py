"""Graph interchange and model files.

The graph file is JSON listing nodes and weighted dependency edges; unknown
fields are rejected by name so configuration typos surface loudly. The GNN
checkpoint mirrors the detector's: a versioned JSON container that round-trips
parameters bitwise.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from ..numerics import ParamSet, Tensor
from ..simulator import ComponentGraph, GraphEdge, GraphNode
from .gnn import GnnParams

_NODE_FIELDS = {"id", "kind", "static_features"}
_EDGE_FIELDS = {"from", "to", "weight"}
_TOP_FIELDS = {"nodes", "edges"}


def write_graph(graph: ComponentGraph, path: str | Path) -> None:
    payload = {
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind,
                "static_features": list(n.static_features),
            }
            for n in graph.nodes
        ],
        "edges": [
            {"from": e.src, "to": e.dst, "weight": e.weight} for e in graph.edges
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def read_graph(path: str | Path) -> ComponentGraph:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = sorted(set(payload) - _TOP_FIELDS)
    if unknown:
        raise SchemaError(f"{path}: unknown top-level fields: {unknown}")
    missing = sorted(_TOP_FIELDS - set(payload))
    if missing:
        raise SchemaError(f"{path}: missing sections: {missing}")
    nodes = []
    for i, entry in enumerate(payload["nodes"]):
        unknown = sorted(set(entry) - _NODE_FIELDS)
        if unknown:
            raise SchemaError(f"{path}: node {i} has unknown fields: {unknown}")
        missing = sorted(_NODE_FIELDS - set(entry))
        if missing:
            raise SchemaError(f"{path}: node {i} missing fields: {missing}")
        nodes.append(
            GraphNode(
                id=str(entry["id"]),
                kind=str(entry["kind"]),
                static_features=tuple(float(x) for x in entry["static_features"]),
            )
        )
    edges = []
    for i, entry in enumerate(payload["edges"]):
        unknown = sorted(set(entry) - _EDGE_FIELDS)
        if unknown:
            raise SchemaError(f"{path}: edge {i} has unknown fields: {unknown}")
        missing = sorted(_EDGE_FIELDS - set(entry))
        if missing:
            raise SchemaError(f"{path}: edge {i} missing fields: {missing}")
        edges.append(
            GraphEdge(
                src=str(entry["from"]),
                dst=str(entry["to"]),
                weight=float(entry["weight"]),
            )
        )
    return ComponentGraph(nodes, edges)


_GNN_FORMAT = "selfheal-gnn"
_GNN_VERSION = 1


def save_gnn(gnn: GnnParams, path: str | Path) -> None:
    payload = {
        "format": _GNN_FORMAT,
        "version": _GNN_VERSION,
        "input_width": gnn.input_width,
        "hidden_widths": list(gnn.hidden_widths),
        "hidden_activation": gnn.hidden_activation,
        "label_horizon": gnn.label_horizon,
        "params": {
            name: {"shape": list(t.shape), "values": t.values.ravel().tolist()}
            for name, t in gnn.params.items()
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_gnn(path: str | Path) -> GnnParams:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != _GNN_FORMAT:
        raise SchemaError(f"{path}: not a GNN checkpoint")
    if payload.get("version") != _GNN_VERSION:
        raise SchemaError(f"{path}: unsupported version {payload.get('version')}")
    params = ParamSet(
        {
            name: Tensor(np.array(entry["values"]).reshape(entry["shape"]))
            for name, entry in payload["params"].items()
        }
    )
    return GnnParams(
        input_width=int(payload["input_width"]),
        hidden_widths=tuple(int(w) for w in payload["hidden_widths"]),
        params=params,
        hidden_activation=str(payload["hidden_activation"]),
        label_horizon=int(payload["label_horizon"]),
    )
