# cli/main.py
"""
Command-line entry point.

  python -m cli.main run --config config/scenarios/task113_ibvs_mppi.yml --out out/
  python -m cli.main suite --test test1 --tasks 20 --seed 7 --parallel 8
  python -m cli.main oracle finite-diff
  python -m cli.main sweep --config config/scenarios/task15_pbvs_aug.yml --w2 1 20 150
  python -m cli.main presets

Exit codes: 0 success, 1 configuration or usage error, 2 the run finished but
failed its success criteria.
"""

import argparse
import os
import sys
from contextlib import redirect_stdout
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from cli.oracles import ORACLES, run_oracle
from cli.writers import write_result, write_suite, write_trajectory
from harness.run_suite import (
    build_test_configs,
    load_presets,
    run_suite,
    sweep_depth_offset,
    sweep_w2,
    task_seed,
)
from harness.poses import sample_initial_poses
from harness.run_task import run_task
from harness.scenario import load_scenario
from utils.config import ConfigError, env_out_dir, env_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2


@dataclass
class RunManifest:
    config: Optional[Path]
    out_dir: Path
    seed: Optional[int] = None
    parallel: int = 1

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.config is not None:
            self.config = Path(self.config)
            if not self.config.exists():
                raise ConfigError("config", f"file not found: {self.config}")
        if self.parallel < 1:
            raise ConfigError("parallel", f"must be >= 1, got {self.parallel}")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError("out", f"cannot create {self.out_dir}: {e}")
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError("out", f"{self.out_dir} is not writable")


def _manifest(args) -> RunManifest:
    seed = args.seed if args.seed is not None else env_seed()
    return RunManifest(
        config=getattr(args, "config", None),
        out_dir=args.out or env_out_dir(),
        seed=seed,
        parallel=args.parallel,
    )


def _scenario_overrides(manifest: RunManifest, samples: Optional[int], mppi_workers: int) -> dict:
    overrides = {"mppi": {"workers": mppi_workers}}
    if manifest.seed is not None:
        overrides["seed"] = manifest.seed
    if samples is not None:
        overrides["mppi"]["samples"] = samples
    return overrides


# -----------------------------------------
# Subcommands
# -----------------------------------------

def cmd_run(args) -> int:
    manifest = _manifest(args)
    if manifest.config is None:
        raise ConfigError("config", "run needs --config PATH")
    cfg = load_scenario(manifest.config, _scenario_overrides(manifest, args.samples, manifest.parallel))
    print(f"[cli] run {cfg.name}: {cfg.scheme.label}/{cfg.controller}, seed={cfg.seed}, out={manifest.out_dir}")

    result = run_task(cfg, verbose=args.verbose)
    task_dir = manifest.out_dir / cfg.name
    write_trajectory(result.logs, task_dir / "trajectory.csv")
    write_result(result, task_dir / "result.json")
    print(f"[cli] wrote {task_dir}/trajectory.csv and result.json")
    return EXIT_OK if result.success else EXIT_FAILED


def _write_suite_outputs(summary, out_dir: Path) -> None:
    for res in summary.results:
        if res.logs is not None:
            write_trajectory(res.logs, out_dir / "tasks" / f"{res.task_id}.csv")
    write_suite(summary, out_dir / "suite.json")
    print(f"[cli] wrote {out_dir}/suite.json and {summary.tasks} task CSVs")


def cmd_suite(args) -> int:
    manifest = _manifest(args)
    seed = manifest.seed if manifest.seed is not None else 0
    if (args.test is None) == (manifest.config is None):
        raise ConfigError("test", "suite needs exactly one of --test NAME or --config PATH")

    if args.test is not None:
        name = args.test
        configs = build_test_configs(name, args.tasks, seed, samples=args.samples)
    else:
        base = load_scenario(manifest.config, _scenario_overrides(manifest, args.samples, 1))
        name = base.name
        poses = sample_initial_poses(args.tasks, seed, base.workspace, base.limits, base.camera, base.object_points)
        configs = []
        for i, pose in enumerate(poses):
            t, r = pose.to_pose_vector()
            configs.append(
                base.with_overrides(
                    {"initial": {"t": t.tolist(), "theta_u_deg": r.tolist()}, "seed": task_seed(seed, i)},
                    name=f"{name}_task{i:03d}",
                )
            )

    summary = run_suite(configs, test=name, workers=manifest.parallel)
    out_dir = manifest.out_dir / name
    _write_suite_outputs(summary, out_dir)

    if args.db:
        from utils.db import insert_suite

        insert_suite(summary, args.db, seed=seed, params={"tasks": args.tasks, "samples": args.samples})
    return EXIT_OK if summary.counts["N_success"] == summary.tasks else EXIT_FAILED


def cmd_sweep(args) -> int:
    manifest = _manifest(args)
    if manifest.config is None:
        raise ConfigError("config", "sweep needs --config PATH")
    if (args.w2 is None) == (args.depth_offsets is None):
        raise ConfigError("sweep", "give exactly one of --w2 or --depth-offsets")
    cfg = load_scenario(manifest.config, _scenario_overrides(manifest, args.samples, 1))

    if args.w2 is not None:
        if cfg.scheme.kind != "pbvs_aug":
            raise ConfigError("scheme", f"--w2 sweeps need scheme pbvs_aug, got {cfg.scheme.kind!r}")
        results = sweep_w2(cfg, args.w2, workers=manifest.parallel)
        label = "w2"
    else:
        results = sweep_depth_offset(cfg, args.depth_offsets, workers=manifest.parallel)
        label = "depth_offset"

    print(f"\n=== Sweep over {label}: {cfg.name} ===")
    for value, res in results.items():
        t_conv = "-" if res.convergence_time is None else f"{res.convergence_time:.2f}s"
        print(f"  {label}={value:g}: success={res.success} P_out={res.P_out} t_conv={t_conv}")
        write_trajectory(res.logs, manifest.out_dir / cfg.name / f"{label}_{value:g}.csv")
        write_result(res, manifest.out_dir / cfg.name / f"{label}_{value:g}.json")
    return EXIT_OK if all(r.success for r in results.values()) else EXIT_FAILED


def cmd_oracle(args) -> int:
    seed = args.seed if args.seed is not None else (env_seed() or 0)
    names = list(ORACLES) if args.name == "all" else [args.name]
    reports = [run_oracle(name, seed=seed) for name in names]
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def cmd_presets(args) -> int:
    for name, entry in load_presets().items():
        print(f"{name:8s} {entry.get('description', '')}")
    return EXIT_OK


# -----------------------------------------
# Parser
# -----------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mppivs", description="MPPI visual servoing simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="scenario YAML/JSON")
        p.add_argument("--out", type=Path, default=None, help="output directory (MPPIVS_OUT_DIR)")
        p.add_argument("--seed", type=int, default=None, help="overrides MPPIVS_SEED and the config seed")
        p.add_argument("--parallel", type=int, default=1)
        p.add_argument("--samples", type=int, default=None, help="MPPI sample count K")
        p.add_argument("--quiet", action="store_true")

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.add_argument("--verbose", action="store_true", help="print progress once per simulated second")
    p_run.set_defaults(func=cmd_run)

    p_suite = sub.add_parser("suite", help="run a named test preset over seeded initial poses")
    common(p_suite)
    p_suite.add_argument("--test", default=None, help="preset name, see `presets`")
    p_suite.add_argument("--tasks", type=int, default=20)
    p_suite.add_argument("--db", default=None, help="also store results in this duckdb file")
    p_suite.set_defaults(func=cmd_suite)

    p_sweep = sub.add_parser("sweep", help="rerun one scenario over w2 or depth-offset values")
    common(p_sweep)
    p_sweep.add_argument("--w2", type=float, nargs="+", default=None)
    p_sweep.add_argument("--depth-offsets", type=float, nargs="+", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="run a self-check")
    p_oracle.add_argument("name", help=f"one of: {', '.join(ORACLES)}, all")
    p_oracle.add_argument("--seed", type=int, default=None)
    p_oracle.add_argument("--quiet", action="store_true")
    p_oracle.set_defaults(func=cmd_oracle)

    p_presets = sub.add_parser("presets", help="list test presets")
    p_presets.set_defaults(func=cmd_presets, quiet=False)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    if args.command == "oracle" and args.name != "all" and args.name not in ORACLES:
        print(f"[cli] error: unknown oracle {args.name!r}; available: {', '.join(ORACLES)}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.quiet:
            with open(os.devnull, "w") as devnull, redirect_stdout(devnull):
                return args.func(args)
        return args.func(args)
    except ConfigError as e:
        print(f"[cli] config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
