# cli/writers.py
"""
Files a run leaves behind: one trajectory CSV per task, one result JSON per
task and a suite summary JSON. Each writer has a reader that checks the
fixed header / keys, so downstream plotting can trust the layout.
"""

import json
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from harness.run_task import RESULT_KEYS, TaskResult, trajectory_columns

SUITE_KEYS = ("test", "tasks", "counts", "S_rate", "convergence", "results")
COUNT_KEYS = ("R_LM", "P_out", "R_JL", "N_success")
CONVERGENCE_KEYS = ("mean", "std", "bin_edges", "counts")


class SchemaError(ValueError):
    pass


# -----------------------------------------
# Trajectory CSV
# -----------------------------------------

def write_trajectory(logs: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_points = _points_in(logs.columns)
    out = logs[trajectory_columns(n_points)].copy()
    out["jl_flag"] = out["jl_flag"].astype(int)
    out.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def read_trajectory(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    n_points = _points_in(df.columns)
    expected = trajectory_columns(n_points)
    if list(df.columns) != expected:
        raise SchemaError(f"{path}: header {list(df.columns)} != {expected}")
    df["jl_flag"] = df["jl_flag"].astype(bool)
    return df


def _points_in(columns) -> int:
    n = sum(1 for c in columns if c.startswith("Z") and c[1:].isdigit())
    if n == 0:
        raise SchemaError("trajectory has no Z columns")
    return n


# -----------------------------------------
# JSON
# -----------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to python, NaN/inf to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _dump(data: Dict[str, Any], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_clean(data), f, indent=2)
        f.write("\n")
    return path


def write_result(result: TaskResult, path) -> Path:
    return _dump(result.summary(), path)


def read_result(path) -> Dict[str, Any]:
    with open(path) as f:
        data = json.load(f)
    if tuple(data) != RESULT_KEYS:
        raise SchemaError(f"{path}: keys {list(data)} != {list(RESULT_KEYS)}")
    return data


def write_suite(summary, path) -> Path:
    return _dump(summary.to_dict(), path)


def read_suite(path) -> Dict[str, Any]:
    with open(path) as f:
        data = json.load(f)
    if tuple(data) != SUITE_KEYS:
        raise SchemaError(f"{path}: keys {list(data)} != {list(SUITE_KEYS)}")
    if tuple(data["counts"]) != COUNT_KEYS:
        raise SchemaError(f"{path}: counts keys {list(data['counts'])}")
    if tuple(data["convergence"]) != CONVERGENCE_KEYS:
        raise SchemaError(f"{path}: convergence keys {list(data['convergence'])}")
    for row in data["results"]:
        if tuple(row) != RESULT_KEYS:
            raise SchemaError(f"{path}: result keys {list(row)}")
    return data
