"""Minimal dense tensor arithmetic with reverse-mode autodiff and SGD."""

from . import tape
from .nets import (
    LOG_CLAMP,
    bce_loss,
    finite_diff_grad,
    forward_mlp,
    init_mlp_params,
    sgd_step,
)
from .tape import GradientTape, Node, grad
from .tensor import ParamSet, Tensor

__all__ = [
    "LOG_CLAMP",
    "GradientTape",
    "Node",
    "ParamSet",
    "Tensor",
    "bce_loss",
    "finite_diff_grad",
    "forward_mlp",
    "grad",
    "init_mlp_params",
    "sgd_step",
    "tape",
]
