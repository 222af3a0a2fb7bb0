"""Command-line interface for the lab.

Exit codes: 0 success, 2 configuration error, 3 stage/training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigurationError, SchemaError, SelfHealError, StageError
from ..seeding import derive_seed
from ..detector import MetaConfig, init_detector, meta_train, save_checkpoint
from ..depgraph import save_gnn, train_gnn, write_graph
from ..recovery import QHyper, RecoveryEnv, RewardWeights, save_policy, train_agent, weight_sweep
from ..simulator import augment_tasks, default_patterns, export_csv, generate_trace, make_tasks
from ..simulator.cascade import make_cascade_dataset, make_tree_graph
from .config import RunConfig, load_config, resolve_action_costs, resolved_config_json
from .pipeline import run_pipeline
from .report import emit_report, parse_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _base_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="JSON config file")
    shared.add_argument("--seed", type=int, help="override the config seed")
    shared.add_argument("--out", type=Path, help="override the output directory")

    parser = argparse.ArgumentParser(
        prog="selfheal",
        description="Self-healing database lab: simulate, train, run, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[shared],
                   help="emit workload traces and a dependency graph")
    sub.add_parser("train-detector", parents=[shared],
                   help="meta-train the anomaly detector and save a checkpoint")
    sub.add_parser("train-gnn", parents=[shared],
                   help="train the failure predictor and save its parameters")
    sub.add_parser("train-agent", parents=[shared],
                   help="train the recovery agent and save its policy table")
    run = sub.add_parser("run", parents=[shared], help="run the full pipeline")
    run.add_argument("--print-config", action="store_true",
                     help="print the fully resolved config and exit")
    rep = sub.add_parser("report", parents=[shared],
                         help="re-emit report files from a structured report")
    rep.add_argument("--input", type=Path, required=True,
                     help="existing report.json")
    sub.add_parser("sweep", parents=[shared],
                   help="train across the weight grid and chart the Pareto front")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_output_dir(str(args.out))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    sim = cfg.simulator
    seed = derive_seed(cfg.seed, "simulator")
    patterns = default_patterns(sim.n_train_patterns,
                                seed=derive_seed(seed, "train-patterns"),
                                anomaly_rate=sim.anomaly_rate)
    for pattern in patterns:
        trace = generate_trace(pattern, derive_seed(seed, "trace", pattern.pattern_id),
                               ticks=600)
        export_csv(trace, out / f"trace-{pattern.pattern_id}.csv")
    graph = make_tree_graph(sim.cascade_nodes, seed=derive_seed(seed, "graph"))
    write_graph(graph, out / "graph.json")
    print(f"wrote {len(patterns)} traces and graph.json to {out}")
    return EXIT_OK


def _cmd_train_detector(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    sim, det = cfg.simulator, cfg.detector
    seed = derive_seed(cfg.seed, "simulator")
    patterns = default_patterns(sim.n_train_patterns,
                                seed=derive_seed(seed, "train-patterns"),
                                anomaly_rate=sim.anomaly_rate)
    tasks = make_tasks(patterns, sim.n_support, sim.n_query, sim.window_width,
                       seed=derive_seed(seed, "train-tasks"))
    tasks = augment_tasks(tasks, sim.jitter_std, sim.mix_count,
                          seed=derive_seed(seed, "augment"))
    det_seed = derive_seed(cfg.seed, "detector")
    layer_spec = tuple((w, "relu") for w in det.hidden_widths) + ((1, "sigmoid"),)
    init = init_detector(tasks[0].feature_width, seed=derive_seed(det_seed, "init"),
                         layer_spec=layer_spec, threshold=det.threshold)
    meta_cfg = MetaConfig(inner_lr=det.inner_lr, meta_lr=det.meta_lr,
                          inner_steps=det.inner_steps, meta_batch=det.meta_batch,
                          meta_iterations=det.meta_iterations, meta_mode=det.meta_mode)
    result = meta_train(init, tasks, meta_cfg, seed=derive_seed(det_seed, "train"))
    save_checkpoint(result.model, out / "detector.json")
    (out / "detector-loss.json").write_text(json.dumps(result.loss_curve))
    print(f"saved detector checkpoint to {out / 'detector.json'} "
          f"(final meta-loss {result.loss_curve[-1]:.4f})")
    return EXIT_OK


def _cmd_train_gnn(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    sim, gnn_cfg = cfg.simulator, cfg.gnn
    seed = derive_seed(cfg.seed, "gnn")
    traces = make_cascade_dataset(sim.n_cascades, seed=derive_seed(seed, "cascades"),
                                  n_nodes=sim.cascade_nodes,
                                  horizon=sim.cascade_horizon,
                                  fail_threshold=sim.fail_threshold)
    split = int(len(traces) * gnn_cfg.train_fraction)
    result = train_gnn(traces[:split], hidden_widths=gnn_cfg.hidden_widths,
                       epochs=gnn_cfg.epochs, lr=gnn_cfg.lr,
                       seed=derive_seed(seed, "train"),
                       label_horizon=gnn_cfg.label_horizon)
    save_gnn(result.gnn, out / "gnn.json")
    (out / "gnn-loss.json").write_text(json.dumps(result.loss_curve))
    print(f"saved GNN parameters to {out / 'gnn.json'} "
          f"(final loss {result.loss_curve[-1]:.4f})")
    return EXIT_OK


def _cmd_train_agent(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    agent = cfg.agent
    seed = derive_seed(cfg.seed, "agent")
    env = RecoveryEnv(episode_ticks=agent.episode_ticks,
                      action_costs=resolve_action_costs(agent),
                      seed=derive_seed(seed, "env"))
    weights = RewardWeights.normalized(*agent.weights)
    hyper = QHyper(gamma=agent.gamma, lr=agent.lr,
                   epsilon_start=agent.epsilon_start,
                   epsilon_end=agent.epsilon_end)
    result = train_agent(env, weights, episodes=agent.episodes, hyper=hyper,
                         seed=derive_seed(seed, "train"))
    save_policy(result.policy, out / "policy.tsv")
    (out / "agent-returns.json").write_text(json.dumps(result.returns))
    print(f"saved policy table to {out / 'policy.tsv'} "
          f"(mean return of last 20 episodes {sum(result.returns[-20:]) / 20:.4f})")
    return EXIT_OK


def _cmd_run(cfg: RunConfig, print_config: bool) -> int:
    if print_config:
        print(resolved_config_json(cfg))
        return EXIT_OK
    report = run_pipeline(cfg)
    written = emit_report(report, _out_dir(cfg))
    for fmt, path in written.items():
        print(f"{fmt}: {path}")
    return EXIT_OK


def _cmd_report(cfg: RunConfig, input_path: Path) -> int:
    report = parse_report(input_path)
    written = emit_report(report, _out_dir(cfg))
    for fmt, path in written.items():
        print(f"{fmt}: {path}")
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    agent = cfg.agent
    env = RecoveryEnv(episode_ticks=agent.episode_ticks,
                      action_costs=resolve_action_costs(agent),
                      seed=derive_seed(derive_seed(cfg.seed, "agent"), "env"))
    grid = [RewardWeights.normalized(*w) for w in agent.sweep_grid]
    result = weight_sweep(env, grid, episodes=agent.sweep_episodes,
                          seed=derive_seed(cfg.seed, "agent", "sweep"),
                          eval_episodes=agent.sweep_eval_episodes)
    front_ids = {id(e) for e in result.front}
    payload = [
        {
            "weights": [e.weights.latency, e.weights.resource, e.weights.cost],
            "objectives": [e.objectives.latency, e.objectives.resource,
                           e.objectives.cost],
            "on_front": id(e) in front_ids,
        }
        for e in result.entries
    ]
    path = out / "sweep.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"swept {len(grid)} weight vectors; front size "
          f"{len(result.front)}; wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _base_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "train-detector":
            return _cmd_train_detector(cfg)
        if args.command == "train-gnn":
            return _cmd_train_gnn(cfg)
        if args.command == "train-agent":
            return _cmd_train_agent(cfg)
        if args.command == "run":
            return _cmd_run(cfg, args.print_config)
        if args.command == "report":
            return _cmd_report(cfg, args.input)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        parser.error(f"unknown command {args.command}")
    except (ConfigurationError, SchemaError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as err:
        print(f"stage failure: {err}", file=sys.stderr)
        return EXIT_STAGE
    except SelfHealError as err:
        print(f"failure: {err}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
