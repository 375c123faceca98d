# servo/classical.py

from dataclasses import dataclass

import numpy as np

from servo.geometry import CameraIntrinsics, Twist, axis_angle_to_rotation
from servo.interaction import ibvs_matrix_for_case, stack_3d
from servo.vscost import VsObservation, VsScheme

# Singular values below PINV_TOL * σ_max are dropped.
PINV_TOL = 1e-10


@dataclass(frozen=True)
class ClassicalGain:
    lambda_s: float = 0.5

    def __post_init__(self):
        if not self.lambda_s > 0:
            raise ValueError(f"lambda_s must be > 0, got {self.lambda_s}")


def pseudo_inverse(M, tol: float = PINV_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse through a thin SVD with relative truncation."""
    M = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = tol * (s.max() if s.size else 0.0)
    keep = s > cutoff
    s_inv = np.divide(1.0, s, out=np.zeros_like(s), where=keep)
    return (Vt.T * s_inv) @ U.T


def c_ibvs(s, s_star, L, lambda_s: float) -> Twist:
    """v_c = -λ_s L̂⁺ (s - s*)."""
    e = np.asarray(s, dtype=float).reshape(-1) - np.asarray(s_star, dtype=float).reshape(-1)
    return Twist.from_vector(-lambda_s * (pseudo_inverse(L) @ e))


def c_3dvs(P, P_star, L, lambda_s: float) -> Twist:
    return c_ibvs(P, P_star, L, lambda_s)


def c_pbvs(t, theta_u, lambda_s: float) -> Twist:
    """
    Decoupled PBVS law: v = -λ_s Rᵀ t, ω = -λ_s θu, with R = ^{c*}R_c.

    Uses L_θu⁻¹ θu = θu, so no 6x6 inverse is formed.
    """
    theta_u = np.asarray(theta_u, dtype=float).reshape(3)
    if np.linalg.norm(theta_u) >= np.pi:
        raise ValueError("c_pbvs needs ‖θu‖ < π")
    R = axis_angle_to_rotation(theta_u)
    v = -lambda_s * (R.T @ np.asarray(t, dtype=float).reshape(3))
    return Twist(v, -lambda_s * theta_u)


class ClassicalController:
    """C-IBVS / C-3DVS / C-PBVS behind the same compute(obs) call as the MPPI controller."""

    def __init__(self, scheme: VsScheme, cam: CameraIntrinsics, desired: VsObservation, gain: ClassicalGain):
        self.scheme = scheme
        self.cam = cam
        self.desired = desired
        self.gain = gain

    def compute(self, obs: VsObservation) -> Twist:
        lam = self.gain.lambda_s
        kind = self.scheme.kind
        if kind == "ibvs":
            L = ibvs_matrix_for_case(
                self.scheme.case,
                (obs.pixels, obs.depths),
                (self.desired.pixels, self.desired.depths),
                self.cam,
            )
            return c_ibvs(obs.pixels, self.desired.pixels, L, lam)
        if kind == "3dvs":
            return c_3dvs(obs.points, self.desired.points, stack_3d(obs.points), lam)
        return c_pbvs(obs.pose_t, obs.pose_theta_u, lam)

    def close(self):
        pass
