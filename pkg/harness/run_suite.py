# harness/run_suite.py
"""
Suites of independent tasks: the named test presets in config/tests.yml, plus
the w2 and depth-offset sweeps. Tasks run on a process pool; results are
collected in task order so the summary does not depend on scheduling.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from harness.poses import sample_initial_poses
from harness.run_task import TaskResult, run_task
from harness.scenario import ScenarioConfig
from utils.config import TESTS_YAML, ConfigError, deep_merge, load_yaml

HIST_BINS = 10


# -----------------------------------------
# Summary
# -----------------------------------------

@dataclass
class SuiteSummary:
    test: str
    results: List[TaskResult] = field(default_factory=list)

    @property
    def tasks(self) -> int:
        return len(self.results)

    @property
    def counts(self) -> Dict[str, int]:
        return {
            "R_LM": sum(r.R_LM for r in self.results),
            "P_out": sum(r.P_out for r in self.results),
            "R_JL": sum(r.R_JL for r in self.results),
            "N_success": sum(r.success for r in self.results),
        }

    @property
    def s_rate(self) -> float:
        """Success rate in percent."""
        return 100.0 * self.counts["N_success"] / self.tasks if self.tasks else 0.0

    def convergence(self, bins: int = HIST_BINS) -> Dict[str, Any]:
        times = np.array(
            [r.convergence_time for r in self.results if r.success and r.convergence_time is not None],
            dtype=float,
        )
        if times.size == 0:
            return {"mean": None, "std": None, "bin_edges": [], "counts": []}
        counts, edges = np.histogram(times, bins=bins)
        return {
            "mean": float(times.mean()),
            "std": float(times.std()),
            "bin_edges": edges.tolist(),
            "counts": counts.tolist(),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "test": self.test,
            "tasks": self.tasks,
            "counts": self.counts,
            "S_rate": self.s_rate,
            "convergence": self.convergence(),
            "results": [r.summary() for r in self.results],
        }

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([r.summary() for r in self.results])


def summarize(test: str, results: Sequence[TaskResult]) -> SuiteSummary:
    return SuiteSummary(test=test, results=list(results))


# -----------------------------------------
# Running
# -----------------------------------------

def _run_one(cfg: ScenarioConfig) -> TaskResult:
    return run_task(cfg)


def run_suite(
    configs: Sequence[ScenarioConfig],
    test: str = "custom",
    workers: int = 1,
) -> SuiteSummary:
    if not configs:
        raise ValueError("run_suite needs at least one scenario")
    print(f"[suite] {test}: {len(configs)} tasks, workers={workers}")

    results: List[TaskResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(_run_one, configs), start=1):
                results.append(res)
                print(f"[suite] {i}/{len(configs)} {res.task_id}: {'ok' if res.success else 'FAIL'}")
    else:
        for i, cfg in enumerate(configs, start=1):
            res = _run_one(cfg)
            results.append(res)
            print(f"[suite] {i}/{len(configs)} {res.task_id}: {'ok' if res.success else 'FAIL'}")

    summary = summarize(test, results)
    c = summary.counts
    print(f"\n=== Suite summary: {test} ===")
    print(f"  tasks={summary.tasks} R_LM={c['R_LM']} P_out={c['P_out']} R_JL={c['R_JL']} N_success={c['N_success']}")
    print(f"  S_rate={summary.s_rate:.1f}%")
    conv = summary.convergence()
    if conv["mean"] is not None:
        print(f"  convergence time: mean={conv['mean']:.2f}s std={conv['std']:.2f}s")
    return summary


# -----------------------------------------
# Presets
# -----------------------------------------

def load_presets() -> Dict[str, Dict[str, Any]]:
    data = load_yaml(TESTS_YAML)
    return {entry["name"]: entry for entry in data.get("tests", [])}


def task_seed(seed: int, index: int) -> int:
    """Per-task seed derived from the suite seed."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def build_test_configs(
    test: str,
    n_tasks: int,
    seed: int,
    samples: Optional[int] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> List[ScenarioConfig]:
    """Preset `test` applied to n_tasks seeded initial poses."""
    presets = load_presets()
    if test not in presets:
        raise ConfigError("test", f"unknown test {test!r}; presets: {', '.join(presets)}")
    if n_tasks < 1:
        raise ConfigError("tasks", f"must be >= 1, got {n_tasks}")

    overrides = deep_merge(presets[test].get("overrides", {}) or {}, extra or {})
    if samples is not None:
        overrides = deep_merge(overrides, {"mppi": {"samples": int(samples)}})
    base = ScenarioConfig.from_dict(overrides, name=test)

    poses = sample_initial_poses(
        n_tasks, seed, base.workspace, base.limits, base.camera, base.object_points
    )
    configs = []
    for i, pose in enumerate(poses):
        t, r = pose.to_pose_vector()
        configs.append(
            base.with_overrides(
                {"initial": {"t": t.tolist(), "theta_u_deg": r.tolist()}, "seed": task_seed(seed, i)},
                name=f"{test}_task{i:03d}",
            )
        )
    return configs


# -----------------------------------------
# Sweeps
# -----------------------------------------

def sweep_w2(cfg: ScenarioConfig, values: Sequence[float], workers: int = 1) -> Dict[float, TaskResult]:
    """Same task under PBVS-augmented costs with different 3D-point weights."""
    configs = [
        cfg.with_overrides({"constraints": {"w2": float(w)}}, name=f"{cfg.name}_w2_{w:g}") for w in values
    ]
    summary = run_suite(configs, test=f"{cfg.name}_w2_sweep", workers=workers)
    return dict(zip([float(w) for w in values], summary.results))


def sweep_depth_offset(
    cfg: ScenarioConfig, offsets: Sequence[float], workers: int = 1
) -> Dict[float, TaskResult]:
    """Same task with the initial depth estimate scaled by (1 + offset)."""
    configs = [
        cfg.with_overrides({"calibration": {"depth_offset": float(o)}}, name=f"{cfg.name}_dz_{o:+g}")
        for o in offsets
    ]
    summary = run_suite(configs, test=f"{cfg.name}_depth_sweep", workers=workers)
    return dict(zip([float(o) for o in offsets], summary.results))
