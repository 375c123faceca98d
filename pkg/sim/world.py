# sim/world.py
"""
Ground-truth gantry world: a static planar target, an eye-in-hand camera
and the robot's joint limits. Controllers never read this state directly;
they get noisy observations and a (possibly wrong) camera model.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from servo.geometry import (
    CameraIntrinsics,
    RigidTransform,
    Twist,
    integrate_twist,
    project_points,
    rotation_to_axis_angle,
    transform_point,
)

# 20 cm square target in the z = 0 plane of F_o
DEFAULT_OBJECT_POINTS = np.array(
    [
        [-0.1, -0.1, 0.0],
        [0.1, -0.1, 0.0],
        [0.1, 0.1, 0.0],
        [-0.1, 0.1, 0.0],
    ]
)


# -----------------------------------------
# Specs
# -----------------------------------------

@dataclass(frozen=True)
class GantryLimits:
    """
    Box on the camera pose in F_o: translation [m] and θu components of ^oR_c [deg].

    Only the z floor and the optical-axis range are hardware-motivated; the
    rest just keeps the camera above the target.
    """
    t_min: Tuple[float, float, float] = (-1.5, -1.5, -1.45)
    t_max: Tuple[float, float, float] = (1.5, 1.5, -0.1)
    r_min_deg: Tuple[float, float, float] = (-90.0, -90.0, -157.0)
    r_max_deg: Tuple[float, float, float] = (90.0, 90.0, 157.0)

    def contains(self, pose: RigidTransform) -> bool:
        t = pose.translation
        r = np.rad2deg(rotation_to_axis_angle(pose.rotation))
        return bool(
            np.all(t >= self.t_min) and np.all(t <= self.t_max)
            and np.all(r >= self.r_min_deg) and np.all(r <= self.r_max_deg)
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform measurement noise amplitudes: ±pixel [px], ±depth [m]."""
    pixel: float = 0.0
    depth: float = 0.0
    seed: int = 0

    @property
    def active(self) -> bool:
        return self.pixel > 0 or self.depth > 0


@dataclass(frozen=True)
class CalibrationError:
    """
    Relative errors of the controller's camera model; 0.3 means +30 %.

    Focal length and pixel sizes enter as f̂_u = f(1+δf) / (ρ_u(1+δρ_u)).
    depth_offset scales the initial depth estimate by (1 + depth_offset).
    """
    focal: float = 0.0
    rho_u: float = 0.0
    rho_v: float = 0.0
    u_0: float = 0.0
    v_0: float = 0.0
    depth_offset: float = 0.0

    def __post_init__(self):
        for name in ("focal", "rho_u", "rho_v"):
            if getattr(self, name) <= -1.0:
                raise ValueError(f"{name} must be > -1, got {getattr(self, name)}")
        if self.depth_offset <= -1.0:
            raise ValueError(f"depth_offset must be > -1, got {self.depth_offset}")


# -----------------------------------------
# World
# -----------------------------------------

@dataclass
class World:
    camera_pose: RigidTransform
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    object_points: np.ndarray = field(default_factory=lambda: DEFAULT_OBJECT_POINTS.copy())

    def __post_init__(self):
        self.object_points = np.asarray(self.object_points, dtype=float).reshape(-1, 3)

    def camera_points(self) -> np.ndarray:
        """(n, 3) target points in the camera frame."""
        return transform_point(self.camera_pose, self.object_points)

    def copy(self) -> "World":
        return World(self.camera_pose, self.camera, self.object_points.copy())


@dataclass
class Observation:
    pixels: np.ndarray    # (n, 2), NaN for points behind the camera
    depths: np.ndarray    # (n,)
    visible: np.ndarray   # (n,) bool


def apply_twist(
    world: World, V: Twist, dt: float, limits: Optional[GantryLimits] = None
) -> Tuple[World, bool]:
    """
    Integrate V for dt. A motion that would leave `limits` is not executed:
    all axes stop for this step and the flag comes back True.
    """
    new_pose = integrate_twist(world.camera_pose, V, dt)
    if limits is not None and not limits.contains(new_pose):
        return world, True
    return replace(world, camera_pose=new_pose), False


def observe(
    world: World,
    camera: Optional[CameraIntrinsics] = None,
    noise: Optional[NoiseSpec] = None,
    rng: Optional[np.random.Generator] = None,
) -> Observation:
    """
    Image of the target under `camera` (the true intrinsics by default).

    Pixel and depth noise are uniform in ±amplitude. Without an explicit rng a
    fresh one is seeded from noise.seed, so repeated calls agree.
    """
    camera = camera or world.camera
    noise = noise or NoiseSpec()
    P = world.camera_points()
    Z = P[:, 2]
    in_front = Z > 0

    with np.errstate(divide="ignore", invalid="ignore"):
        pixels = project_points(P, camera)
    pixels[~in_front] = np.nan
    depths = Z.copy()

    if noise.active:
        rng = rng if rng is not None else np.random.default_rng(noise.seed)
        pixels = pixels + rng.uniform(-noise.pixel, noise.pixel, size=pixels.shape)
        depths = depths + rng.uniform(-noise.depth, noise.depth, size=depths.shape)

    u, v = pixels[:, 0], pixels[:, 1]
    visible = in_front & (u >= 0) & (u <= camera.width) & (v >= 0) & (v <= camera.height)
    return Observation(pixels=pixels, depths=depths, visible=visible)


def perturb_model(camera: CameraIntrinsics, error: CalibrationError) -> Tuple[CameraIntrinsics, float]:
    """(Γ̂, depth factor) the controller believes in."""
    cam_hat = CameraIntrinsics(
        f_u=camera.f_u * (1.0 + error.focal) / (1.0 + error.rho_u),
        f_v=camera.f_v * (1.0 + error.focal) / (1.0 + error.rho_v),
        u_0=camera.u_0 * (1.0 + error.u_0),
        v_0=camera.v_0 * (1.0 + error.v_0),
        width=camera.width,
        height=camera.height,
    )
    return cam_hat, 1.0 + error.depth_offset


def true_pose_error(world: World, desired: RigidTransform) -> Tuple[np.ndarray, np.ndarray]:
    """(^{c*}t_c, θu of ^{c*}R_c) from the true current and desired camera poses."""
    rel = desired.inverse().compose(world.camera_pose)
    return rel.translation, rotation_to_axis_angle(rel.rotation)
