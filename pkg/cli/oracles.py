# cli/oracles.py
"""
Self-checks that need no reference data: each oracle exercises one piece of
the library against an independent computation and reports the worst error
it saw against a fixed threshold.
"""

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from servo.classical import pseudo_inverse
from servo.geometry import (
    CameraIntrinsics,
    RigidTransform,
    Twist,
    axis_angle_to_rotation,
    integrate_twist,
    move_points,
    project_points,
    rotation_to_axis_angle,
    transform_point,
)
from servo.interaction import pbvs_velocity_matrix, stack_3d, stack_ibvs
from servo.mppi import MppiConfig, MppiEngine, RolloutProblem
from servo.vscost import VsObservation, VsScheme, build_model
from sim.world import DEFAULT_OBJECT_POINTS
from utils.config import ConfigError

FD_STEP = 1e-4


@dataclass
class OracleReport:
    name: str
    passed: bool
    max_error: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[oracle] {self.name}: {status} max_error={self.max_error:.3g} (threshold {self.threshold:g}) {self.detail}".rstrip()


def _report(name: str, max_error: float, threshold: float, detail: str = "") -> OracleReport:
    max_error = float(max_error)
    return OracleReport(name, bool(np.isfinite(max_error) and max_error < threshold), max_error, threshold, detail)


def _random_pose(rng) -> RigidTransform:
    t = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-1.2, -0.5)])
    r = np.array([rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-150, 150)])
    return RigidTransform.from_pose_vector(t, r)


def _random_twist(rng) -> Twist:
    return Twist(rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.2, 0.2, 3))


def _rel_error(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


# -----------------------------------------
# Oracles
# -----------------------------------------

def finite_diff(seed: int = 0, n_pairs: int = 1000, threshold: float = 1e-3) -> OracleReport:
    """Central differences of the simulated features against L·v for the 2D, 3D and pose matrices."""
    rng = np.random.default_rng(seed)
    cam = CameraIntrinsics()
    desired = RigidTransform.from_pose_vector([0.0, 0.0, -0.75], [0.0, 0.0, 0.0])
    worst = {"ibvs": 0.0, "3dvs": 0.0, "pbvs": 0.0}

    def features(pose):
        P = transform_point(pose, DEFAULT_OBJECT_POINTS)
        rel = desired.inverse().compose(pose)
        pose_vec = np.concatenate([rel.translation, rotation_to_axis_angle(rel.rotation)])
        return project_points(P, cam).reshape(-1), P.reshape(-1), pose_vec

    for _ in range(n_pairs):
        pose = _random_pose(rng)
        V = _random_twist(rng)
        plus = features(integrate_twist(pose, V, FD_STEP))
        minus = features(integrate_twist(pose, -V, FD_STEP))
        fd = [(a - b) / (2.0 * FD_STEP) for a, b in zip(plus, minus)]

        P = transform_point(pose, DEFAULT_OBJECT_POINTS)
        pixels = project_points(P, cam)
        rel = desired.inverse().compose(pose)
        theta_u = rotation_to_axis_angle(rel.rotation)
        v = V.as_vector()

        worst["ibvs"] = max(worst["ibvs"], _rel_error(fd[0], stack_ibvs(pixels, P[:, 2], cam) @ v))
        worst["3dvs"] = max(worst["3dvs"], _rel_error(fd[1], stack_3d(P) @ v))
        worst["pbvs"] = max(worst["pbvs"], _rel_error(fd[2], pbvs_velocity_matrix(rel.rotation, theta_u) @ v))

    detail = " ".join(f"{k}={e:.2g}" for k, e in worst.items())
    return _report("finite-diff", max(worst.values()), threshold, f"({n_pairs} pairs; {detail})")


def pinv_axioms(seed: int = 0, n_matrices: int = 200, threshold: float = 1e-9) -> OracleReport:
    """The four Moore-Penrose conditions on full-rank and rank-deficient matrices."""
    rng = np.random.default_rng(seed)
    shapes = [(8, 6), (12, 6), (6, 6), (4, 6)]
    worst = 0.0
    for i in range(n_matrices):
        m, n = shapes[i % len(shapes)]
        M = rng.standard_normal((m, n))
        if i % 3 == 2:
            r = int(rng.integers(1, min(m, n)))
            M = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
        Mp = pseudo_inverse(M)
        MMp, MpM = M @ Mp, Mp @ M
        # residual relative to the size of the term it checks
        residuals = (
            (MMp @ M - M, M),
            (Mp @ MMp - Mp, Mp),
            (MMp.T - MMp, MMp),
            (MpM.T - MpM, MpM),
        )
        worst = max(worst, max(float(np.max(np.abs(r)) / max(np.max(np.abs(ref)), 1.0)) for r, ref in residuals))
    return _report("pinv-axioms", worst, threshold, f"({n_matrices} matrices)")


def rotation_roundtrip(seed: int = 0, n_samples: int = 2000, threshold: float = 1e-9) -> OracleReport:
    """log(exp(θu)) = θu for ‖θu‖ < π, including angles close to 0 and π."""
    rng = np.random.default_rng(seed)
    axes = rng.standard_normal((n_samples, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, np.pi - 1e-6, n_samples)
    angles[:6] = [0.0, 1e-8, 1e-5, 1e-3, np.pi - 1e-4, np.pi - 1e-6]
    theta_u = axes * angles[:, None]

    R = axis_angle_to_rotation(theta_u)
    worst = max(float(np.max(np.abs(rotation_to_axis_angle(R[i]) - theta_u[i]))) for i in range(n_samples))
    return _report("rotation-roundtrip", worst, threshold, f"({n_samples} rotations)")


def depth_integration(seed: int = 0, n_steps: int = 500, threshold: float = 1e-12) -> OracleReport:
    """Under a constant v_z the tracked depth and the IBVS model both give Z(t) = Z0 - v_z t."""
    rng = np.random.default_rng(seed)
    cam = CameraIntrinsics()
    dt = 0.02
    pose = RigidTransform.from_pose_vector([0.0, 0.0, -1.2], [0.0, 0.0, 0.0])
    P0 = transform_point(pose, DEFAULT_OBJECT_POINTS)
    v_z = float(rng.uniform(0.01, 0.05))
    twist = Twist(np.array([0.0, 0.0, v_z]), np.zeros(3))

    pixels = project_points(P0, cam)
    model = build_model(
        VsScheme.ibvs(0),
        cam,
        VsObservation(pixels, P0[:, 2], P0, np.zeros(3), np.zeros(3)),
    )
    state = model.state_from(VsObservation(pixels, P0[:, 2], P0, np.zeros(3), np.zeros(3)))

    P = P0.copy()
    worst = 0.0
    n = len(P0)
    for k in range(1, n_steps + 1):
        P = move_points(P, twist, dt)
        state = model.predict(state, twist, dt)
        exact = P0[:, 2] - v_z * k * dt
        worst = max(worst, float(np.max(np.abs(P[:, 2] - exact))), float(np.max(np.abs(state[2 * n:] - exact))))
    return _report("depth-integration", worst, threshold, f"(v_z={v_z:.3f} m/s, {n_steps} steps)")


def mppi_toy(seed: int = 0, n_steps: int = 100, threshold: float = 1e-2) -> OracleReport:
    """1D integrator ẋ = u from x0 = 1 with q(x) = 100x²; passes when |x| gets below threshold."""
    cfg = MppiConfig(samples=1000, horizon_steps=20, dt=0.05, lam=1.0, nu=1000.0, sigma_u=(0.25,), seed=seed)
    problem = RolloutProblem(
        dynamics=lambda x, u, dt: x + u * dt,
        running_cost=lambda x: 100.0 * x[:, 0] ** 2,
    )
    x = np.array([1.0])
    xs = []
    with MppiEngine(cfg) as engine:
        for _ in range(n_steps):
            u = engine.step(x, problem)
            x = x + u * cfg.dt
            xs.append(float(x[0]))
    xs = np.abs(np.array(xs))
    tail = float(xs[-20:].mean())
    return _report("mppi-toy", float(xs.min()), threshold, f"(final |x|={xs[-1]:.3g}, tail mean={tail:.3g})")


ORACLES: Dict[str, Callable[..., OracleReport]] = {
    "finite-diff": finite_diff,
    "pinv-axioms": pinv_axioms,
    "mppi-toy": mppi_toy,
    "depth-integration": depth_integration,
    "rotation-roundtrip": rotation_roundtrip,
}


def run_oracle(name: str, seed: int = 0) -> OracleReport:
    if name not in ORACLES:
        raise ConfigError("oracle", f"unknown oracle {name!r}; available: {', '.join(ORACLES)}")
    report = ORACLES[name](seed=seed)
    print(report.line())
    return report
