"""Small dense networks over the tape: MLP forward pass, BCE, SGD, and the
finite-difference oracle every gradient in this package is checked against."""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import ConfigurationError, InputError
from . import tape
from .tensor import ParamSet, Tensor

LOG_CLAMP = 1e-7

LayerSpec = Sequence[tuple[int, str]]

_ACTIVATIONS: dict[str, Callable] = {
    "relu": tape.relu,
    "sigmoid": tape.sigmoid,
    "tanh": tape.tanh,
    "linear": lambda x: x,
}


def layer_param_names(layer_index: int) -> tuple[str, str]:
    return f"layer{layer_index}.W", f"layer{layer_index}.b"


def init_mlp_params(
    input_width: int, layer_spec: LayerSpec, seed: int
) -> ParamSet:
    """Uniform init in [-0.5/sqrt(fan_in), +0.5/sqrt(fan_in)] per layer."""
    rng = np.random.Generator(np.random.PCG64(seed))
    entries: dict[str, Tensor] = {}
    fan_in = input_width
    for i, (width, _activation) in enumerate(layer_spec):
        bound = 0.5 / np.sqrt(fan_in)
        w_name, b_name = layer_param_names(i)
        entries[w_name] = Tensor(rng.uniform(-bound, bound, size=(fan_in, width)))
        entries[b_name] = Tensor(rng.uniform(-bound, bound, size=(width,)))
        fan_in = width
    return ParamSet(entries)


def _entry(params, name: str):
    try:
        value = params[name]
    except KeyError:
        raise ConfigurationError(f"missing parameter '{name}'") from None
    return value.values if isinstance(value, Tensor) else value


def forward_mlp(
    params: ParamSet | Mapping[str, tape.Node],
    x,
    layer_spec: LayerSpec,
):
    """Feed-forward pass through the layers of `layer_spec`.

    `params` may be a ParamSet (pure evaluation, returns a Tensor) or a
    mapping of tape leaves (taped evaluation, returns a Node). Input may be a
    single feature vector (d,) or a batch (n, d).
    """
    h = tape.value_of(x)
    if h.ndim not in (1, 2):
        raise InputError(f"input must be a vector or batch, got shape {h.shape}")
    taped = any(isinstance(v, tape.Node) for v in dict(params).values())
    current: object = h
    width = h.shape[-1]
    for i, (out_width, activation) in enumerate(layer_spec):
        if activation not in _ACTIVATIONS:
            raise ConfigurationError(
                f"layer {i}: unknown activation '{activation}'"
            )
        w_name, b_name = layer_param_names(i)
        w = _entry(params, w_name)
        b = _entry(params, b_name)
        w_shape = w.shape if not isinstance(w, tape.Node) else w.value.shape
        b_shape = b.shape if not isinstance(b, tape.Node) else b.value.shape
        if w_shape != (width, out_width) or b_shape != (out_width,):
            raise ConfigurationError(
                f"layer {i}: expected W{(width, out_width)} and b{(out_width,)}, "
                f"got W{tuple(w_shape)} and b{tuple(b_shape)}"
            )
        current = _ACTIVATIONS[activation](tape.add(tape.matmul(current, w), b))
        width = out_width
    if taped:
        return current
    return Tensor(np.asarray(current, dtype=np.float64))


def _check_labels(labels: np.ndarray) -> None:
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise InputError("labels must be 0 or 1")


def bce_loss(pred, label):
    """Binary cross-entropy, -[y ln p + (1-y) ln(1-p)], averaged over a batch.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logs. Accepts
    scalars, arrays, or taped nodes for `pred`; labels must be 0/1.
    """
    labels = np.asarray(tape.value_of(label), dtype=np.float64)
    _check_labels(labels)
    p = tape.clip(pred, LOG_CLAMP, 1.0 - LOG_CLAMP)
    term = tape.add(
        tape.mul(labels, tape.log(p)),
        tape.mul(1.0 - labels, tape.log(tape.sub(1.0, p))),
    )
    return tape.mul(tape.mean(term), -1.0)


def sgd_step(params: ParamSet, grads: ParamSet, lr: float) -> ParamSet:
    """One descent step: out[k] = params[k] - lr * grads[k]. Inputs unchanged."""
    if lr < 0:
        raise InputError(f"learning rate must be >= 0, got {lr}")
    bad = params.mismatches(grads)
    if bad:
        raise InputError(f"params and grads are not update-compatible: {bad}")
    return ParamSet(
        {k: Tensor(params[k].values - lr * grads[k].values) for k in params}
    )


def finite_diff_grad(
    loss_fn: Callable[[ParamSet], float], params: ParamSet, step: float
) -> ParamSet:
    """Central-difference gradient (L(p+h) - L(p-h)) / 2h per coordinate.

    The verification oracle: independent of the tape, exact for linear and
    quadratic losses up to rounding.
    """
    if step <= 0:
        raise InputError(f"step must be > 0, got {step}")
    flat = params.flatten()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + step
        hi = float(loss_fn(params.like(bumped)))
        bumped[i] = flat[i] - step
        lo = float(loss_fn(params.like(bumped)))
        out[i] = (hi - lo) / (2.0 * step)
    return params.like(out)
