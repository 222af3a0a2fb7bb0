"""Detector model container, thresholded scoring, and checkpoint I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, InputError, SchemaError
from ..numerics import ParamSet, Tensor, forward_mlp, init_mlp_params

DEFAULT_LAYER_SPEC = ((32, "relu"), (16, "relu"), (1, "sigmoid"))

CHECKPOINT_FORMAT = "selfheal-detector"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DetectorModel:
    """An MLP anomaly scorer with a decision threshold."""

    input_width: int
    layer_spec: tuple[tuple[int, str], ...]
    params: ParamSet
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError(
                f"threshold must be in (0, 1), got {self.threshold}"
            )
        if self.layer_spec[-1][0] != 1:
            raise ConfigurationError("final layer must have width 1")

    def with_params(self, params: ParamSet) -> "DetectorModel":
        return replace(self, params=params)


def init_detector(
    input_width: int,
    seed: int,
    layer_spec=DEFAULT_LAYER_SPEC,
    threshold: float = 0.5,
) -> DetectorModel:
    spec = tuple((int(w), str(a)) for w, a in layer_spec)
    return DetectorModel(
        input_width=input_width,
        layer_spec=spec,
        params=init_mlp_params(input_width, spec, seed),
        threshold=threshold,
    )


def detect(model: DetectorModel, x) -> tuple[float, int]:
    """Score one feature vector; flag = 1 iff score >= threshold."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != model.input_width:
        raise InputError(
            f"expected a feature vector of width {model.input_width}, "
            f"got shape {vec.shape}"
        )
    score = float(forward_mlp(model.params, vec, model.layer_spec).values[0])
    return score, int(score >= model.threshold)


def save_checkpoint(model: DetectorModel, path: str | Path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_width": model.input_width,
        "threshold": model.threshold,
        "layer_spec": [[w, a] for w, a in model.layer_spec],
        "params": {
            name: {"shape": list(t.shape), "values": t.values.ravel().tolist()}
            for name, t in model.params.items()
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_checkpoint(path: str | Path) -> DetectorModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"{path}: not a detector checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"{path}: unsupported version {payload.get('version')}")
    params = ParamSet(
        {
            name: Tensor(np.array(entry["values"]).reshape(entry["shape"]))
            for name, entry in payload["params"].items()
        }
    )
    return DetectorModel(
        input_width=int(payload["input_width"]),
        layer_spec=tuple((int(w), str(a)) for w, a in payload["layer_spec"]),
        params=params,
        threshold=float(payload["threshold"]),
    )
