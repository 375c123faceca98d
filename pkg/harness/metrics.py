# harness/metrics.py

from typing import Optional, Sequence, Union

import numpy as np

from servo.geometry import axis_angle_to_rotation, rotation_to_axis_angle
from servo.vscost import VsScheme

# MSE thresholds on the steady-state pose error
EPS_TRANSLATION = 1e-5   # m²
EPS_ROTATION = 1e-4      # rad²

STALL_TWIST_NORM = 1e-4
STALL_WINDOW_S = 2.0


def pose_mse(e) -> float:
    """(2/6) eᵀe, the per-axis mean over the 6-dof pose."""
    e = np.asarray(e, dtype=float).reshape(-1)
    return float((2.0 / 6.0) * (e @ e))


def check_local_minimum(e1, e2) -> bool:
    """True when the steady state is the goal (local minimum avoided); strict inequalities."""
    return pose_mse(e1) < EPS_TRANSLATION and pose_mse(e2) < EPS_ROTATION


def convergence_time(
    err_norms: Sequence[float], dt: float, scheme_or_threshold: Union[VsScheme, float]
) -> Optional[float]:
    """
    Start of the final stretch during which the error norm stays below threshold.

    0.0 if it never leaves the band, None if the last sample is still outside.
    """
    err = np.asarray(err_norms, dtype=float)
    if err.size == 0:
        raise ValueError("convergence_time needs a nonempty log")
    thr = (
        scheme_or_threshold.error_threshold
        if isinstance(scheme_or_threshold, VsScheme)
        else float(scheme_or_threshold)
    )
    above = np.flatnonzero(~(err < thr))
    if above.size == 0:
        return 0.0
    last = int(above[-1])
    if last == err.size - 1:
        return None
    return (last + 1) * dt


def stall_start(twist_norms: Sequence[float], dt: float, window_s: float = STALL_WINDOW_S) -> Optional[float]:
    """
    Start of the final stretch of commanded twists below STALL_TWIST_NORM.

    None unless that stretch reaches the end of the log and lasts window_s.
    """
    quiet = np.asarray(twist_norms, dtype=float) < STALL_TWIST_NORM
    need = max(1, int(round(window_s / dt)))
    loud = np.flatnonzero(~quiet)
    first = 0 if loud.size == 0 else int(loud[-1]) + 1
    if quiet.size - first < need:
        return None
    return first * dt


def steady_state_error(poses: np.ndarray, desired: np.ndarray, n_window: int):
    """
    Mean pose error over the last n_window rows.

    poses: (N, 6) rows of (t [m], θu [rad]); desired: (6,).
    Returns (e1 translation, e2 rotation); e2 averages θu of R*ᵀR per row.
    """
    poses = np.asarray(poses, dtype=float)
    desired = np.asarray(desired, dtype=float)
    tail = poses[-max(1, min(n_window, len(poses))):]
    e1 = tail[:, :3].mean(axis=0) - desired[:3]
    R_star_t = axis_angle_to_rotation(desired[3:]).T
    e2 = np.mean([rotation_to_axis_angle(R_star_t @ axis_angle_to_rotation(r)) for r in tail[:, 3:]], axis=0)
    return e1, e2
