"""End-to-end orchestration: train every learner, run the closed loop, and
collect the full metric report.

All randomness flows from the run seed through named substreams (simulator /
detector / gnn / agent / eval), so retraining one component never perturbs the
others and two runs of the same config produce identical reports.
"""

from __future__ import annotations

import statistics

import numpy as np

from .. import __version__
from ..errors import StageError
from ..seeding import derive_seed
from ..detector import (
    DetectorModel,
    MetaConfig,
    detect,
    evaluate,
    init_detector,
    inner_adapt,
    meta_train,
)
from ..depgraph import (
    mttfp,
    node_failure_accuracy,
    predict_failures,
    prediction_rates,
    train_gnn,
)
from ..explain import BackgroundSet, metric_groups, shapley_attribution
from ..recovery import (
    AgentTrainResult,
    RecoveryEnv,
    RewardWeights,
    QHyper,
    SystemState,
    estimate_normalizers,
    evaluate_policy,
    no_op_policy,
    random_policy,
    train_agent,
    weight_sweep,
    weighted_objective,
    zero_policy,
)
from ..simulator import (
    TelemetryWindow,
    augment_tasks,
    default_patterns,
    make_tasks,
)
from ..simulator.cascade import make_cascade_dataset, make_tree_graph, propagate_cascade
from ..simulator.tasks import window_feature
from .config import RunConfig, resolve_action_costs
from .report import RunReport


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as err:
                raise StageError(name, err) from err

        return run

    return wrap


def compare_adaptation(
    meta_model: DetectorModel,
    baseline_model: DetectorModel,
    tasks,
    inner_lr: float,
    max_steps: int,
) -> list[tuple[int, int]]:
    """Adaptation-step counts for both initializations on identical tasks."""
    cfg = MetaConfig(inner_lr=inner_lr, inner_steps=max_steps)
    pairs = []
    for task in tasks:
        proposed = evaluate(meta_model, task, cfg).adaptation_steps
        baseline = evaluate(baseline_model, task, cfg).adaptation_steps
        pairs.append((proposed, baseline))
    return pairs


@_stage("tasks")
def _build_tasks(cfg: RunConfig):
    sim = cfg.simulator
    seed = derive_seed(cfg.seed, "simulator")
    train_patterns = default_patterns(
        sim.n_train_patterns, seed=derive_seed(seed, "train-patterns"),
        anomaly_rate=sim.anomaly_rate,
    )
    eval_patterns = default_patterns(
        sim.n_eval_patterns, seed=derive_seed(seed, "eval-patterns"),
        anomaly_rate=sim.anomaly_rate,
    )
    train_tasks = make_tasks(
        train_patterns, sim.n_support, sim.n_query, sim.window_width,
        seed=derive_seed(seed, "train-tasks"),
    )
    train_tasks = augment_tasks(
        train_tasks, sim.jitter_std, sim.mix_count, seed=derive_seed(seed, "augment")
    )
    eval_tasks = make_tasks(
        eval_patterns, sim.n_support, sim.n_query, sim.window_width,
        seed=derive_seed(seed, "eval-tasks"),
    )
    return train_tasks, eval_tasks


@_stage("detector")
def _train_and_eval_detector(cfg: RunConfig, train_tasks, eval_tasks):
    det = cfg.detector
    seed = derive_seed(cfg.seed, "detector")
    width = train_tasks[0].feature_width
    layer_spec = tuple((w, "relu") for w in det.hidden_widths) + ((1, "sigmoid"),)
    init = init_detector(width, seed=derive_seed(seed, "init"),
                         layer_spec=layer_spec, threshold=det.threshold)
    meta_cfg = MetaConfig(
        inner_lr=det.inner_lr, meta_lr=det.meta_lr, inner_steps=det.inner_steps,
        meta_batch=det.meta_batch, meta_iterations=det.meta_iterations,
        meta_mode=det.meta_mode,
    )
    result = meta_train(init, train_tasks, meta_cfg, seed=derive_seed(seed, "train"))

    eval_cfg = MetaConfig(inner_lr=det.inner_lr, inner_steps=det.eval_inner_steps)
    reports = [evaluate(result.model, task, eval_cfg) for task in eval_tasks]
    detection = {
        "precision": float(np.mean([r.precision for r in reports])),
        "recall": float(np.mean([r.recall for r in reports])),
        "f1": float(np.mean([r.f1 for r in reports])),
        "per_task_f1": [r.f1 for r in reports],
        "tasks": len(eval_tasks),
        "inner_steps": det.eval_inner_steps,
    }

    baseline = init_detector(width, seed=derive_seed(seed, "baseline-init"),
                             layer_spec=layer_spec, threshold=det.threshold)
    pairs = compare_adaptation(
        result.model, baseline, eval_tasks, det.inner_lr, det.adapt_max_steps
    )
    adaptation = {
        "per_task": [list(p) for p in pairs],
        "median_proposed": float(statistics.median(p for p, _ in pairs)),
        "median_baseline": float(statistics.median(b for _, b in pairs)),
        "max_steps": det.adapt_max_steps,
        "loss_bound": 0.35,
    }
    return result.model, detection, adaptation


@_stage("depgraph")
def _train_and_eval_gnn(cfg: RunConfig):
    sim, gnn_cfg = cfg.simulator, cfg.gnn
    seed = derive_seed(cfg.seed, "gnn")
    traces = make_cascade_dataset(
        sim.n_cascades, seed=derive_seed(seed, "cascades"),
        n_nodes=sim.cascade_nodes, horizon=sim.cascade_horizon,
        fail_threshold=sim.fail_threshold,
    )
    split = int(len(traces) * gnn_cfg.train_fraction)
    train, held = traces[:split], traces[split:]
    result = train_gnn(
        train, hidden_widths=gnn_cfg.hidden_widths, epochs=gnn_cfg.epochs,
        lr=gnn_cfg.lr, seed=derive_seed(seed, "train"),
        label_horizon=gnn_cfg.label_horizon,
    )
    accuracy = node_failure_accuracy(result.gnn, held,
                                     flag_threshold=gnn_cfg.flag_threshold)
    leads, early, alarms, misses = [], 0, [], []
    for trace in held:
        pred = predict_failures(trace.graph, trace.node_telemetry, result.gnn,
                                horizon=trace.ticks,
                                flag_threshold=gnn_cfg.flag_threshold)
        lead = mttfp(pred, trace, cfg.eval.tick_seconds)
        if lead is not None and lead > 0:
            early += 1
            leads.append(lead)
        rates = prediction_rates(pred, trace)
        alarms.append(rates["false_alarm_rate"])
        misses.append(rates["miss_rate"])
    dependency = {
        "accuracy": float(accuracy),
        "mttfp_seconds": float(np.mean(leads)) if leads else None,
        "early_warning_fraction": early / len(held),
        "false_alarm_rate": float(np.mean(alarms)),
        "miss_rate": float(np.mean(misses)),
        "held_out_cascades": len(held),
        "training_cascades": len(train),
    }
    return result.gnn, dependency


@_stage("agent")
def _train_and_eval_agent(cfg: RunConfig):
    agent = cfg.agent
    seed = derive_seed(cfg.seed, "agent")
    env = RecoveryEnv(
        episode_ticks=agent.episode_ticks,
        action_costs=resolve_action_costs(agent),
        seed=derive_seed(seed, "env"),
    )
    weights = RewardWeights.normalized(*agent.weights)
    hyper = QHyper(gamma=agent.gamma, lr=agent.lr,
                   epsilon_start=agent.epsilon_start, epsilon_end=agent.epsilon_end)
    if agent.episodes == 0:
        result = AgentTrainResult(policy=zero_policy(hyper), returns=[],
                                  normalizers=(1.0, 1.0, 1.0))
    else:
        result = train_agent(env, weights, episodes=agent.episodes, hyper=hyper,
                             seed=derive_seed(seed, "train"))

    eval_seed = derive_seed(cfg.seed, "eval")
    episode_seeds = [
        derive_seed(eval_seed, "recovery-episode", i)
        for i in range(cfg.eval.recovery_episodes)
    ]
    norms = estimate_normalizers(env, seed=derive_seed(eval_seed, "normalizers"))
    proposed, _ = evaluate_policy(env, result.policy.choose, episode_seeds)
    rand, _ = evaluate_policy(
        env, random_policy(derive_seed(eval_seed, "random-policy")), episode_seeds
    )
    noop, _ = evaluate_policy(env, no_op_policy, episode_seeds)

    def as_entry(vec):
        return {
            "latency_ms": vec.latency,
            "resource": vec.resource,
            "cost": vec.cost,
            "weighted": weighted_objective(vec, weights, norms),
        }

    entries = {"proposed": as_entry(proposed), "random": as_entry(rand),
               "no_op": as_entry(noop)}
    recovery = {
        **entries,
        "improvement_vs_random_pct": {
            key: 100.0 * (entries["random"][key] - entries["proposed"][key])
            / entries["random"][key]
            for key in ("latency_ms", "resource", "cost", "weighted")
            if entries["random"][key] > 0
        },
        "improvement_vs_no_op_pct": {
            key: 100.0 * (entries["no_op"][key] - entries["proposed"][key])
            / entries["no_op"][key]
            for key in ("latency_ms", "resource", "weighted")
            if entries["no_op"][key] > 0
        },
        "normalizers": list(norms),
        "weights": [weights.latency, weights.resource, weights.cost],
        "episode_seeds": episode_seeds,
        "episodes": len(episode_seeds),
    }
    return env, result.policy, weights, norms, recovery


@_stage("sweep")
def _sweep(cfg: RunConfig, env):
    agent = cfg.agent
    grid = [RewardWeights.normalized(*w) for w in agent.sweep_grid]
    result = weight_sweep(
        env, grid, episodes=agent.sweep_episodes,
        seed=derive_seed(cfg.seed, "agent", "sweep"),
        eval_episodes=agent.sweep_eval_episodes,
    )
    front_ids = {id(e) for e in result.front}
    return {
        "entries": [
            {
                "weights": [e.weights.latency, e.weights.resource, e.weights.cost],
                "objectives": [e.objectives.latency, e.objectives.resource,
                               e.objectives.cost],
                "on_front": id(e) in front_ids,
            }
            for e in result.entries
        ],
        "front_size": len(result.front),
    }


@_stage("closed_loop")
def _closed_loop(cfg: RunConfig, model: DetectorModel, gnn, env: RecoveryEnv,
                 policy, weights, norms):
    """Per tick: detect on the latest telemetry window, gate the agent's
    anomaly awareness on the detector flag, predict cascade impact when a
    cascade is flagged, then apply the greedy action."""
    eval_seed = derive_seed(cfg.seed, "eval", "closed-loop")
    width = cfg.simulator.window_width
    episodes = []
    action_counts: dict[str, int] = {}
    for e in range(cfg.eval.closed_loop_episodes):
        ep_seed = derive_seed(eval_seed, "episode", e)
        state = env.reset(ep_seed)
        history: list[TelemetryWindow] = []
        kind, onset = env.episode_anomaly()
        first_flag = None
        false_flags = 0
        cascade_pred = None
        done = False
        tick = 0
        while not done:
            metrics = env.current_metrics()
            history.append(TelemetryWindow(index=tick, label=0, **metrics))
            window = history[-width:]
            while len(window) < width:  # left-pad the first few ticks
                window = [window[0]] + window
            feature = window_feature(window, 0, width)
            _, flag = detect(model, feature)
            truly_active = env.true_anomaly_kind() is not None
            if flag and truly_active and first_flag is None:
                first_flag = tick
            if flag and not truly_active:
                false_flags += 1
            if flag and truly_active and kind == "cascade" and cascade_pred is None:
                graph = make_tree_graph(
                    cfg.simulator.cascade_nodes, seed=derive_seed(ep_seed, "graph")
                )
                trace = propagate_cascade(
                    graph, "n0", onset=min(onset, cfg.simulator.cascade_horizon - 1),
                    horizon=cfg.simulator.cascade_horizon,
                    fail_threshold=cfg.simulator.fail_threshold,
                    seed=derive_seed(ep_seed, "cascade"),
                )
                pred = predict_failures(graph, trace.node_telemetry, gnn,
                                        horizon=trace.ticks)
                lead = mttfp(pred, trace, cfg.eval.tick_seconds)
                cascade_pred = {"early_warning": lead is not None and lead > 0,
                                "lead_seconds": lead}
            observed = SystemState(
                load_level=state.load_level,
                anomaly_status=state.anomaly_status if flag else "none",
                failed=state.failed,
            )
            action = policy.greedy(observed)
            action_counts[action.name] = action_counts.get(action.name, 0) + 1
            state, done = env.step(action)
            tick += 1
        episodes.append(
            {
                "episode_seed": ep_seed,
                "anomaly_kind": kind,
                "onset": onset,
                "detection_delay_ticks": None if first_flag is None
                else first_flag - onset,
                "false_flag_ticks": false_flags,
                "cascade_prediction": cascade_pred,
                "final_weighted_snapshot": weighted_objective(
                    env.snapshot(), weights, norms
                ),
            }
        )
    delays = [e["detection_delay_ticks"] for e in episodes
              if e["detection_delay_ticks"] is not None]
    return {
        "episodes": episodes,
        "detected_fraction": len(delays) / len(episodes),
        "mean_detection_delay_ticks": float(np.mean(delays)) if delays else None,
        "actions": dict(sorted(action_counts.items())),
    }


@_stage("explain")
def _attribution(cfg: RunConfig, model: DetectorModel, eval_tasks):
    """Shapley report for the first flagged anomalous query window.

    The explained model is the deployed one: the meta-trained detector after
    adaptation on the task's support set. The background is that task's own
    normal windows."""
    det = cfg.detector
    groups = metric_groups(cfg.simulator.window_width)
    for task in eval_tasks:
        adapted_params = inner_adapt(
            model.params, (task.support_x, task.support_y), det.inner_lr,
            det.eval_inner_steps, model.layer_spec,
        )
        adapted = model.with_params(adapted_params)
        normals = np.concatenate(
            [task.support_x[task.support_y == 0.0], task.query_x[task.query_y == 0.0]]
        )
        if len(normals) < 2:
            continue
        background = BackgroundSet(normals[: cfg.eval.background_rows])
        for row, label in zip(task.query_x, task.query_y):
            if label == 1.0 and detect(adapted, row)[1] == 1:
                att = shapley_attribution(adapted, row, background, groups)
                return {
                    "groups": list(att.group_names),
                    "contributions": list(att.contributions),
                    "base_value": att.base_value,
                    "instance_value": att.instance_value,
                    "source_task": task.source_pattern_id,
                }
    return {"groups": [], "contributions": [], "base_value": None,
            "instance_value": None, "source_task": None}


def run_pipeline(cfg: RunConfig) -> RunReport:
    train_tasks, eval_tasks = _build_tasks(cfg)
    model, detection, adaptation = _train_and_eval_detector(
        cfg, train_tasks, eval_tasks
    )
    gnn, dependency = _train_and_eval_gnn(cfg)
    env, policy, weights, norms, recovery = _train_and_eval_agent(cfg)
    pareto = _sweep(cfg, env)
    closed_loop = _closed_loop(cfg, model, gnn, env, policy, weights, norms)
    attribution = _attribution(cfg, model, eval_tasks)
    return RunReport(
        provenance={
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "version": __version__,
        },
        detection=detection,
        adaptation=adaptation,
        dependency=dependency,
        recovery=recovery,
        pareto=pareto,
        attribution=attribution,
        closed_loop=closed_loop,
    )
