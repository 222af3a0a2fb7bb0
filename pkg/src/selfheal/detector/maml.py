"""Episodic meta-training for few-shot anomaly detection.

The inner loop runs a handful of gradient steps on a task's support set; the
meta step then descends on the summed post-adaptation query losses across the
batch. Two meta-gradient modes exist: `first_order` treats the inner-loop
Jacobian as identity (the default and the fast path); `exact_fd_oracle`
differentiates through the inner loop by central finite differences and is
meant for verification on small models only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, TrainingError
from ..numerics import (
    GradientTape,
    ParamSet,
    bce_loss,
    finite_diff_grad,
    forward_mlp,
    grad,
    sgd_step,
    tape,
)
from ..simulator import Task
from .model import DEFAULT_LAYER_SPEC, DetectorModel, detect

# Support loss level that counts as "adapted" when measuring adaptation steps.
ADAPT_LOSS_BOUND = 0.35

META_MODES = ("first_order", "exact_fd_oracle")

_FD_STEP = 1e-5


@dataclass(frozen=True)
class MetaConfig:
    """Hyperparameters of the two-loop training scheme."""

    inner_lr: float = 0.5
    meta_lr: float = 0.1
    inner_steps: int = 2
    meta_batch: int = 6
    meta_iterations: int = 2500
    meta_mode: str = "first_order"

    def __post_init__(self):
        if self.inner_lr < 0 or self.meta_lr < 0:
            raise InputError("learning rates must be >= 0")
        if self.inner_steps < 0:
            raise InputError("inner_steps must be >= 0")
        if self.meta_batch < 1 or self.meta_iterations < 0:
            raise InputError("meta_batch must be >= 1 and meta_iterations >= 0")
        if self.meta_mode not in META_MODES:
            raise InputError(f"meta_mode must be one of {META_MODES}")


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2:
        x, y = data
    else:
        pairs = list(data)
        if not pairs:
            raise InputError("data must be nonempty")
        x = np.stack([np.asarray(p[0], dtype=np.float64) for p in pairs])
        y = np.array([p[1] for p in pairs], dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if len(x) == 0:
        raise InputError("data must be nonempty")
    return x, y


def _mlp_loss(layer_spec):
    def loss_fn(params_map, x, y):
        pred = forward_mlp(params_map, x, layer_spec)
        if isinstance(pred, tape.Node):
            return bce_loss(pred, y.reshape(-1, 1))
        return bce_loss(pred.values[:, 0], y)

    return loss_fn


def task_loss(params: ParamSet, data, layer_spec=DEFAULT_LAYER_SPEC) -> float:
    """Mean BCE of the model's outputs over a labeled dataset."""
    x, y = _as_xy(data)
    return float(tape.value_of(_mlp_loss(layer_spec)(params, x, y)))


def inner_adapt(
    params: ParamSet,
    support,
    inner_lr: float,
    steps: int,
    layer_spec=DEFAULT_LAYER_SPEC,
    loss_fn=None,
) -> ParamSet:
    """`steps` gradient steps on the support loss; the input set is untouched.

    With inner_lr == 0 or steps == 0 this is exactly the identity.
    """
    if steps < 0:
        raise InputError(f"steps must be >= 0, got {steps}")
    if steps == 0 or inner_lr == 0.0:
        return params
    loss_fn = loss_fn or _mlp_loss(layer_spec)
    x, y = _as_xy(support)
    current = params
    for _ in range(steps):
        recorder = GradientTape(current)
        loss = loss_fn(recorder.leaves, x, y)
        current = sgd_step(current, grad(loss, current), inner_lr)
    return current


def meta_gradient(
    params: ParamSet,
    tasks: list[Task],
    cfg: MetaConfig,
    layer_spec=DEFAULT_LAYER_SPEC,
    loss_fn=None,
) -> ParamSet:
    """Gradient of the summed post-adaptation query losses w.r.t. `params`.

    first_order evaluates each task's query gradient at the adapted
    parameters (inner Jacobian taken as identity) and sums in task order.
    exact_fd_oracle differentiates the full two-loop objective by central
    finite differences; intended for small verification models.
    """
    if not tasks:
        raise InputError("tasks must be nonempty")
    loss_fn = loss_fn or _mlp_loss(layer_spec)

    if cfg.meta_mode == "first_order":
        total: ParamSet | None = None
        for task in tasks:
            adapted = inner_adapt(
                params, (task.support_x, task.support_y), cfg.inner_lr,
                cfg.inner_steps, layer_spec, loss_fn,
            )
            recorder = GradientTape(adapted)
            loss = loss_fn(recorder.leaves, *_as_xy((task.query_x, task.query_y)))
            g = grad(loss, adapted)
            total = g if total is None else ParamSet(
                {k: total[k].values + g[k].values for k in total}
            )
        return total

    def objective(p: ParamSet) -> float:
        value = 0.0
        for task in tasks:
            adapted = inner_adapt(
                p, (task.support_x, task.support_y), cfg.inner_lr,
                cfg.inner_steps, layer_spec, loss_fn,
            )
            value += float(
                tape.value_of(loss_fn(adapted, *_as_xy((task.query_x, task.query_y))))
            )
        return value

    return finite_diff_grad(objective, params, _FD_STEP)


def meta_update(
    params: ParamSet,
    tasks: list[Task],
    cfg: MetaConfig,
    layer_spec=DEFAULT_LAYER_SPEC,
    loss_fn=None,
) -> ParamSet:
    """One meta step: params - meta_lr * meta_gradient. Identity when meta_lr=0."""
    if not tasks:
        raise InputError("tasks must be nonempty")
    if cfg.meta_lr == 0.0:
        return params
    g = meta_gradient(params, tasks, cfg, layer_spec, loss_fn)
    return sgd_step(params, g, cfg.meta_lr)


@dataclass
class MetaTrainResult:
    model: DetectorModel
    loss_curve: list[float]  # mean post-adaptation query loss per iteration


def meta_train(
    init: DetectorModel, tasks: list[Task], cfg: MetaConfig, seed: int
) -> MetaTrainResult:
    """Run `meta_iterations` meta-updates over seeded task minibatches."""
    if len(tasks) < cfg.meta_batch:
        raise InputError(
            f"need at least meta_batch={cfg.meta_batch} tasks, got {len(tasks)}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    params = init.params
    loss_fn = _mlp_loss(init.layer_spec)
    curve: list[float] = []
    for iteration in range(cfg.meta_iterations):
        picked = rng.choice(len(tasks), size=cfg.meta_batch, replace=False)
        batch = [tasks[int(i)] for i in picked]
        batch_loss = 0.0
        total: ParamSet | None = None
        try:
            for task in batch:
                adapted = inner_adapt(
                    params, (task.support_x, task.support_y), cfg.inner_lr,
                    cfg.inner_steps, init.layer_spec, loss_fn,
                )
                if cfg.meta_mode == "first_order":
                    recorder = GradientTape(adapted)
                    loss = loss_fn(recorder.leaves, task.query_x, task.query_y)
                    g = grad(loss, adapted)
                    total = g if total is None else ParamSet(
                        {k: total[k].values + g[k].values for k in total}
                    )
                    batch_loss += float(tape.value_of(loss))
                else:
                    batch_loss += task_loss(
                        adapted, (task.query_x, task.query_y), init.layer_spec
                    )
            if not np.isfinite(batch_loss):
                raise TrainingError("meta-loss is not finite", iteration)
            if cfg.meta_mode == "first_order":
                params = sgd_step(params, total, cfg.meta_lr)
            else:
                params = meta_update(params, batch, cfg, init.layer_spec, loss_fn)
        except InputError as err:
            # non-finite parameters surface as tensor construction failures
            raise TrainingError(f"parameters diverged: {err}", iteration) from err
        curve.append(batch_loss / cfg.meta_batch)
    return MetaTrainResult(model=init.with_params(params), loss_curve=curve)


@dataclass(frozen=True)
class EvalReport:
    """Detection quality on one task's query set after support adaptation."""

    precision: float
    recall: float
    f1: float
    adaptation_steps: int
    confusion: tuple[int, int, int, int]  # (tp, fp, fn, tn)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(model: DetectorModel, task: Task, cfg: MetaConfig) -> EvalReport:
    """Adapt on support, score the query set, and report P/R/F1.

    adaptation_steps is the smallest step count at which the support loss
    reaches ADAPT_LOSS_BOUND, or cfg.inner_steps if it never does within the
    budget.
    """
    loss_fn = _mlp_loss(model.layer_spec)
    support = (task.support_x, task.support_y)
    params = model.params
    adaptation_steps = cfg.inner_steps
    if task_loss(params, support, model.layer_spec) <= ADAPT_LOSS_BOUND:
        adaptation_steps = 0
    for step in range(1, cfg.inner_steps + 1):
        params = inner_adapt(params, support, cfg.inner_lr, 1, model.layer_spec, loss_fn)
        if (
            adaptation_steps == cfg.inner_steps
            and task_loss(params, support, model.layer_spec) <= ADAPT_LOSS_BOUND
        ):
            adaptation_steps = step

    adapted = model.with_params(params)
    tp = fp = fn = tn = 0
    for row, label in zip(task.query_x, task.query_y):
        _, flag = detect(adapted, row)
        if flag and label == 1.0:
            tp += 1
        elif flag:
            fp += 1
        elif label == 1.0:
            fn += 1
        else:
            tn += 1
    precision, recall, f1 = _prf(tp, fp, fn)
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        adaptation_steps=adaptation_steps,
        confusion=(tp, fp, fn, tn),
    )
