"""Command-line experiment runner: train, evaluate, baseline, pareto.

Exit codes: 0 success, 2 configuration problems (message names the field),
1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines, evolve, nets, runio
from .config import ConfigError, ExperimentConfig, config_hash, load_config, save_config
from .env import UavMecEnv, episode_objectives, rollout
from .evolve import ObjectivePoint, archive_hypervolume, pareto_analysis, sparsity
from .updates import TaskTuple


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "update_rule", None):
        cfg = replace(cfg, update_rule=args.update_rule)
    if getattr(args, "scheduler", None):
        cfg = replace(cfg, env=replace(cfg.env, scheduler_kind=args.scheduler))
    return cfg


def cmd_train(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = runio.resolve_output_dir(args.out, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)

    result = evolve.run(
        cfg.evo,
        cfg.env,
        cfg.update_rule,
        cfg.ppo,
        cfg.tdl,
        cfg.optim,
        cfg.nets,
        cfg.gae_lambda,
        cfg.seed,
        workers=args.workers,
    )

    save_config(cfg, out / "config.yaml")
    runio.write_metrics_csv(out / "metrics.csv", result.generation_log, cfg.evo.n_tasks)
    runio.write_training_csv(out / "training.csv", result.training_log)
    checkpoint_paths = []
    for i, entry in enumerate(result.archive):
        rel = f"checkpoints/archive_{i:03d}.ckpt"
        nets.save_checkpoint(out / rel, entry.weight, entry.task.policy, entry.task.critic)
        checkpoint_paths.append(rel)
    runio.write_archive_json(out / "archive.json", result.archive, result.reference_point, checkpoint_paths)
    files = ["config.yaml", "metrics.csv", "training.csv", "archive.json"] + checkpoint_paths
    runio.write_manifest(out, config_hash(cfg), cfg.seed, "train", files)

    final = result.generation_log[-1]
    print(f"run complete: {out}")
    print(f"archive size {final.archive_size}, hypervolume {final.hypervolume:.6g}")
    return 0


def _parse_seeds(raw: str) -> list[int]:
    try:
        seeds = [int(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"seeds must be a comma-separated integer list, got {raw!r}") from None
    if not seeds:
        raise ConfigError("at least one evaluation seed is required")
    return seeds


def _write_eval_outputs(out: Path, policy_fn, env_cfg, seeds, cfg, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    files = ["summary.csv", "devices.csv"]
    for seed in seeds:
        ledger, _ = rollout(policy_fn, env_cfg, seed)
        f1, f2 = episode_objectives(ledger)
        summary_rows.append([seed, f1, f2])
        rel = f"trajectory_{seed}.csv"
        runio.write_trajectory_csv(out / rel, ledger)
        files.append(rel)
    runio.write_csv(out / "summary.csv", runio.EVAL_SCHEMA, runio.EVAL_HEADER, summary_rows)
    runio.write_devices_csv(out / "devices.csv", UavMecEnv(env_cfg).gds, env_cfg.limits.coverage_radius)
    runio.write_manifest(out, config_hash(cfg), cfg.seed, command, files)
    print(f"evaluation written to {out}")


def cmd_evaluate(args) -> int:
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        seeds = _parse_seeds(args.seeds)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        weight, policy, critic = nets.load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load checkpoint: {exc}", file=sys.stderr)
        return 1
    if policy.obs_dim != cfg.env.obs_dim:
        print(
            f"error: checkpoint expects {policy.obs_dim} state features but the"
            f" config produces {cfg.env.obs_dim}",
            file=sys.stderr,
        )
        return 1

    task = TaskTuple(weight=weight, policy=policy, critic=critic)
    out = runio.resolve_output_dir(args.out, str(Path(cfg.output_dir) / "eval"))
    _write_eval_outputs(out, evolve.deterministic_policy(task), cfg.env, seeds, cfg, "evaluate")
    return 0


def cmd_baseline(args) -> int:
    try:
        cfg = load_config(args.config)
        seeds = _parse_seeds(args.seeds)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    kind = baselines.BaselineKind(variant=args.kind)
    env_cfg = baselines.baseline_env_config(cfg.env)
    gds = UavMecEnv(env_cfg).gds
    policy_fn = baselines.baseline_policy(kind, env_cfg, gds)
    out = runio.resolve_output_dir(args.out, str(Path(cfg.output_dir) / f"baseline_{args.kind}"))
    _write_eval_outputs(out, policy_fn, env_cfg, seeds, cfg, f"baseline:{args.kind}")
    return 0


def cmd_pareto(args) -> int:
    run_dir = Path(args.run)
    archive_path = run_dir / "archive.json"
    if not archive_path.exists():
        print(f"error: {archive_path} not found", file=sys.stderr)
        return 1
    payload = runio.read_archive_json(archive_path)
    entries = payload["entries"]
    if not entries:
        print("error: archive is empty", file=sys.stderr)
        return 1

    k = args.k
    if k is None:
        try:
            cfg = load_config(run_dir / "config.yaml")
            k = cfg.evo.kmeans_k
        except (ConfigError, OSError):
            k = 3

    points = [ObjectivePoint(e["f1"], e["f2"]) for e in entries]
    ref = ObjectivePoint(payload["reference_point"]["f1"], payload["reference_point"]["f2"])
    pseudo_archive = [
        evolve.ArchiveEntry(point=p, weight=np.asarray(e["weight"]), task=None)
        for p, e in zip(points, entries)
    ]
    front = pareto_analysis(pseudo_archive, k)
    hv = archive_hypervolume(points, ref)
    runio.write_pareto_json(run_dir / "pareto.json", front.clusters, hv, sparsity(points), ref)

    manifest = runio.read_manifest(run_dir)
    files = sorted({f["path"] for f in manifest["files"]} | {"pareto.json"})
    runio.write_manifest(run_dir, manifest["config_hash"], manifest["seed"], manifest["command"], files)
    print(f"pareto analysis written to {run_dir / 'pareto.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavmec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run the full training pipeline")
    train.add_argument("--config", required=True, help="experiment config YAML")
    train.add_argument("--seed", type=int, default=None, help="override the config seed")
    train.add_argument("--out", default=None, help="output directory")
    train.add_argument("--workers", type=int, default=1, help="parallel task trainings per generation")
    train.add_argument("--scheduler", choices=["sa", "fcfs", "sjf", "ps"], default=None)
    train.add_argument("--update-rule", dest="update_rule", choices=["ppo", "tdl"], default=None)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a policy checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", required=True)
    ev.add_argument("--seeds", required=True, help="comma-separated evaluation seeds")
    ev.add_argument("--out", default=None)
    ev.add_argument("--scheduler", choices=["sa", "fcfs", "sjf", "ps"], default=None)
    ev.set_defaults(func=cmd_evaluate)

    base = sub.add_parser("baseline", help="evaluate a non-learning baseline")
    base.add_argument("--kind", required=True, choices=list(baselines.BASELINE_VARIANTS))
    base.add_argument("--config", required=True)
    base.add_argument("--seeds", required=True, help="comma-separated evaluation seeds")
    base.add_argument("--out", default=None)
    base.set_defaults(func=cmd_baseline)

    par = sub.add_parser("pareto", help="cluster and interpolate a run's archive")
    par.add_argument("--run", required=True, help="run directory containing archive.json")
    par.add_argument("--k", type=int, default=None, help="cluster count (default: config kmeans_k)")
    par.set_defaults(func=cmd_pareto)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
