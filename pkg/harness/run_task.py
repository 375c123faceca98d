# harness/run_task.py
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from harness.metrics import (
    STALL_TWIST_NORM,
    STALL_WINDOW_S,
    check_local_minimum,
    convergence_time,
    pose_mse,
    stall_start,
    steady_state_error,
)
from harness.scenario import ScenarioConfig
from servo.classical import ClassicalController
from servo.geometry import CameraIntrinsics, Twist, move_points, rotation_to_axis_angle
from servo.interaction import back_project
from servo.mppi import MppiConfig, MppiEngine
from servo.vscost import VsModel, VsObservation, build_model
from sim.world import World, apply_twist, observe, perturb_model, true_pose_error

RESULT_KEYS = (
    "task_id", "scheme", "controller", "success", "R_LM", "R_JL", "P_out",
    "convergence_time", "stalled_at", "final_mse_t", "final_mse_r", "steps", "error",
)


def trajectory_columns(n_points: int) -> List[str]:
    cols = ["t"]
    cols += [f"u{i + 1}" for i in range(n_points)]
    cols += [f"v{i + 1}" for i in range(n_points)]
    cols += [f"Z{i + 1}" for i in range(n_points)]
    cols += ["tx", "ty", "tz", "rux", "ruy", "ruz", "vx", "vy", "vz", "wx", "wy", "wz", "err_norm", "jl_flag"]
    return cols


# -----------------------------------------
# Result
# -----------------------------------------

@dataclass
class TaskResult:
    task_id: str
    scheme: str
    controller: str
    R_LM: bool = False
    R_JL: bool = False
    P_out: bool = False
    convergence_time: Optional[float] = None
    final_mse_t: float = float("nan")
    final_mse_r: float = float("nan")
    steps: int = 0
    jl_hits: int = 0
    stalled_at: Optional[float] = None
    error: Optional[str] = None
    wall_s: float = 0.0
    logs: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return not (self.R_LM or self.R_JL or self.P_out)

    def summary(self) -> Dict[str, object]:
        out = {
            "task_id": self.task_id,
            "scheme": self.scheme,
            "controller": self.controller,
            "success": self.success,
            "R_LM": self.R_LM,
            "R_JL": self.R_JL,
            "P_out": self.P_out,
            "convergence_time": self.convergence_time,
            "stalled_at": self.stalled_at,
            "final_mse_t": _finite_or_none(self.final_mse_t),
            "final_mse_r": _finite_or_none(self.final_mse_r),
            "steps": self.steps,
            "error": self.error,
        }
        return {k: out[k] for k in RESULT_KEYS}


def _finite_or_none(x: float) -> Optional[float]:
    return float(x) if np.isfinite(x) else None


# -----------------------------------------
# Controllers
# -----------------------------------------

class MppiController:
    """MPPI engine driving a VsModel; same compute(obs) call as ClassicalController."""

    def __init__(self, model: VsModel, cfg: MppiConfig):
        self.model = model
        self.engine = MppiEngine(cfg)
        self._problem = model.problem()

    def compute(self, obs: VsObservation) -> Twist:
        return Twist.from_vector(self.engine.step(self.model.state_from(obs), self._problem))

    def close(self):
        self.engine.close()


def desired_observation(cfg: ScenarioConfig, cam_hat: CameraIntrinsics) -> VsObservation:
    """s* as the real camera records it at the desired pose, with known Z*."""
    world_star = World(cfg.desired_pose, cfg.camera, cfg.object_points)
    pixels = observe(world_star).pixels
    depths = world_star.camera_points()[:, 2]
    return VsObservation(
        pixels=pixels,
        depths=depths,
        points=back_project(pixels, depths, cam_hat),
        pose_t=np.zeros(3),
        pose_theta_u=np.zeros(3),
    )


def make_controller(cfg: ScenarioConfig, cam_hat: CameraIntrinsics, desired: VsObservation):
    if cfg.controller == "classical":
        return ClassicalController(cfg.scheme, cam_hat, desired, cfg.classical)
    model = build_model(cfg.scheme, cam_hat, desired, cfg.constraints, cfg.weights)
    return MppiController(model, cfg.mppi)


# -----------------------------------------
# Closed loop
# -----------------------------------------

def _true_error_norm(cfg: ScenarioConfig, world: World, star_pixels, star_points) -> float:
    kind = cfg.scheme.kind
    if kind == "ibvs":
        return float(np.linalg.norm(observe(world).pixels - star_pixels))
    if kind == "3dvs":
        return float(np.linalg.norm(world.camera_points() - star_points))
    t, tu = true_pose_error(world, cfg.desired_pose)
    return float(np.linalg.norm(np.concatenate([t, tu])))


def run_task(cfg: ScenarioConfig, task_id: Optional[str] = None, verbose: bool = False) -> TaskResult:
    """
    Closed loop at cfg.rate_hz: observe -> controller -> apply_twist.

    Stops at the first feature leaving the image, or once the commanded twist
    has stayed below STALL_TWIST_NORM for STALL_WINDOW_S away from the goal.
    Controller failures end the run and are recorded on the result, never raised.
    """
    started = time.perf_counter()
    task_id = task_id or cfg.name
    dt = cfg.dt
    n = len(cfg.object_points)

    cam_hat, depth_factor = perturb_model(cfg.camera, cfg.calibration)
    desired = desired_observation(cfg, cam_hat)
    star_points = World(cfg.desired_pose, cfg.camera, cfg.object_points).camera_points()
    desired_vec = np.concatenate(
        [cfg.desired_pose.translation, rotation_to_axis_angle(cfg.desired_pose.rotation)]
    )
    controller = make_controller(cfg, cam_hat, desired)

    world = World(cfg.initial_pose, cfg.camera, cfg.object_points)
    rng = np.random.default_rng(cfg.noise.seed)
    pixel_noise = replace(cfg.noise, depth=0.0)
    thr = cfg.scheme.error_threshold
    settle_steps = None
    stall_steps = max(1, int(round(STALL_WINDOW_S * cfg.rate_hz)))
    if cfg.stop_after_converged_s is not None:
        settle_steps = max(1, int(round(cfg.stop_after_converged_s * cfg.rate_hz)))

    rows = []
    depth_hat = None
    P_out = False
    jl_hits = 0
    error = None
    in_band = 0
    quiet = 0
    commanded = []
    k = 0

    try:
        for k in range(cfg.n_steps):
            obs = observe(world, cfg.camera, pixel_noise, rng)
            if not np.all(obs.visible):
                P_out = True
                print(f"[task] {task_id}: feature left the image at t={k * dt:.2f}s, stopping")
                break

            if depth_hat is None:
                depth_hat = obs.depths * depth_factor
            # the depth sensor reads the tracked estimate, plus noise
            depth_meas = depth_hat
            if cfg.noise.depth > 0:
                depth_meas = depth_hat + rng.uniform(-cfg.noise.depth, cfg.noise.depth, size=n)
            pose_t, pose_tu = true_pose_error(world, cfg.desired_pose)
            vs_obs = VsObservation(
                pixels=obs.pixels,
                depths=depth_meas,
                points=back_project(obs.pixels, depth_meas, cam_hat),
                pose_t=pose_t,
                pose_theta_u=pose_tu,
            )

            twist = controller.compute(vs_obs)
            if not np.all(np.isfinite(twist.as_vector())):
                raise FloatingPointError("controller returned a non-finite twist")
            commanded.append(float(np.linalg.norm(twist.as_vector())))

            err_norm = _true_error_norm(cfg, world, desired.pixels, star_points)
            next_world, jl = apply_twist(world, twist, dt, cfg.limits)
            applied = Twist.zero() if jl else twist
            jl_hits += int(jl)

            pose = world.camera_pose
            rows.append(
                [k * dt]
                + obs.pixels[:, 0].tolist()
                + obs.pixels[:, 1].tolist()
                + depth_hat.tolist()
                + pose.translation.tolist()
                + rotation_to_axis_angle(pose.rotation).tolist()
                + applied.as_vector().tolist()
                + [err_norm, bool(jl)]
            )

            # depth tracker follows the executed motion
            tracked = back_project(obs.pixels, depth_hat, cam_hat)
            depth_hat = move_points(tracked, applied, dt)[:, 2]
            world = next_world

            if verbose and k % int(round(cfg.rate_hz)) == 0:
                print(f"[task] {task_id} t={k * dt:6.2f}s err={err_norm:.4g} jl={jl}")

            in_band = in_band + 1 if err_norm < thr else 0
            if settle_steps is not None and in_band >= settle_steps:
                break
            quiet = quiet + 1 if commanded[-1] < STALL_TWIST_NORM else 0
            if quiet >= stall_steps and err_norm >= thr:
                print(f"[task] {task_id}: controller stalled away from the goal at t={k * dt:.2f}s, stopping")
                break
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        error = f"{type(e).__name__}: {e}"
        print(f"[task] {task_id}: controller failure at step {k}: {e}")
    finally:
        controller.close()

    logs = pd.DataFrame(rows, columns=trajectory_columns(n))
    if len(logs):
        poses = logs[["tx", "ty", "tz", "rux", "ruy", "ruz"]].to_numpy()
    else:
        poses = np.concatenate(
            [world.camera_pose.translation, rotation_to_axis_angle(world.camera_pose.rotation)]
        )[None]
    e1, e2 = steady_state_error(poses, desired_vec, int(round(cfg.rate_hz)))
    converged = check_local_minimum(e1, e2) and error is None

    stalled_at = None if converged else stall_start(commanded, dt)

    # A stall settles it as a local minimum; otherwise blocked motion counts against the limits.
    R_JL = not P_out and not converged and stalled_at is None and jl_hits > 0
    R_LM = not P_out and not converged and not R_JL

    result = TaskResult(
        task_id=task_id,
        scheme=cfg.scheme.label,
        controller=cfg.controller,
        R_LM=R_LM,
        R_JL=R_JL,
        P_out=P_out,
        final_mse_t=pose_mse(e1),
        final_mse_r=pose_mse(e2),
        steps=len(logs),
        jl_hits=jl_hits,
        stalled_at=stalled_at,
        error=error,
        logs=logs,
    )
    if len(logs) and result.success:
        result.convergence_time = convergence_time(logs["err_norm"].to_numpy(), dt, thr)
    result.wall_s = time.perf_counter() - started

    t_conv = "-" if result.convergence_time is None else f"{result.convergence_time:.2f}s"
    print(
        f"[task] {task_id} {result.scheme}/{result.controller}: success={result.success} "
        f"R_LM={R_LM} R_JL={R_JL} P_out={P_out} t_conv={t_conv} stalled_at={stalled_at} steps={result.steps} "
        f"wall={result.wall_s:.1f}s"
    )
    return result
