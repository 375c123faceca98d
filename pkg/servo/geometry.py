# servo/geometry.py

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from scipy.linalg import polar


# -----------------------------------------
# Errors & constants
# -----------------------------------------

class DepthBehindCamera(ValueError):
    """Raised when a camera-frame point with Z <= 0 is projected."""


# Below this angle the trigonometric ratios switch to Taylor series.
SMALL_ANGLE = 1e-4

# Within this distance of pi the log map reads the axis from the symmetric part.
NEAR_PI = 1e-3


# -----------------------------------------
# Shared types
# -----------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Pinhole intrinsics Γ = (f_u, f_v, u_0, v_0) plus image bounds, all in pixels.

    Defaults are the gantry camera: 640x480, f = 8.4 mm, pixel 10 µm -> 840 px.
    """
    f_u: float = 840.0
    f_v: float = 840.0
    u_0: float = 320.0
    v_0: float = 240.0
    width: float = 640.0
    height: float = 480.0

    def __post_init__(self):
        if self.f_u <= 0 or self.f_v <= 0:
            raise ValueError(f"focal lengths must be positive, got f_u={self.f_u}, f_v={self.f_v}")
        if not (0.0 <= self.u_0 <= self.width and 0.0 <= self.v_0 <= self.height):
            raise ValueError(
                f"principal point ({self.u_0}, {self.v_0}) outside image {self.width}x{self.height}"
            )

    @property
    def normalized_half_extent(self) -> Tuple[float, float]:
        """(x_max, y_max) of the image box on the normalized plane."""
        return (0.5 * self.width) / self.f_u, (0.5 * self.height) / self.f_v


class PixelPoint(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class Twist:
    """Camera velocity screw (v [m/s], ω [rad/s]) expressed in the camera frame."""
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec) -> "Twist":
        vec = np.asarray(vec, dtype=float).reshape(6)
        return cls(vec[:3].copy(), vec[3:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    def __neg__(self) -> "Twist":
        return Twist(-self.v, -self.w)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """
    Camera pose in the world (object) frame: ^oR_c and ^ot_c.

    A world point maps to the camera frame as P_cam = Rᵀ (P_world - t).
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_pose_vector(cls, translation, theta_u_deg) -> "RigidTransform":
        """Build from the (t [m], θu [deg]) pose vectors used throughout the configs."""
        theta_u = np.deg2rad(np.asarray(theta_u_deg, dtype=float))
        return cls(axis_angle_to_rotation(theta_u), np.asarray(translation, dtype=float))

    def to_pose_vector(self) -> Tuple[np.ndarray, np.ndarray]:
        """(t [m], θu [deg])"""
        return self.translation.copy(), np.rad2deg(rotation_to_axis_angle(self.rotation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self · other, i.e. ^aT_b · ^bT_c = ^aT_c."""
        return RigidTransform(
            orthonormalize(self.rotation @ other.rotation),
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T.copy(), -self.rotation.T @ self.translation)


# -----------------------------------------
# so(3) helpers
# -----------------------------------------

def skew(w) -> np.ndarray:
    """[w]x for w of shape (..., 3) -> (..., 3, 3)."""
    w = np.asarray(w, dtype=float)
    z = np.zeros(w.shape[:-1])
    x, y, zz = w[..., 0], w[..., 1], w[..., 2]
    return np.stack(
        [
            np.stack([z, -zz, y], axis=-1),
            np.stack([zz, z, -x], axis=-1),
            np.stack([-y, x, z], axis=-1),
        ],
        axis=-2,
    )


def vee(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], axis=-1)


def orthonormalize(R) -> np.ndarray:
    """Nearest orthonormal matrix (polar factor)."""
    u, _ = polar(np.asarray(R, dtype=float))
    return u


def axis_angle_to_rotation(theta_u) -> np.ndarray:
    """
    Rodrigues exponential map. Accepts (..., 3) and returns (..., 3, 3).
    """
    w = np.asarray(theta_u, dtype=float)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    W = skew(w)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    return np.eye(3) + a * W + b * (W @ W)


def rotation_to_axis_angle(R) -> np.ndarray:
    """
    Log map SO(3) -> θu with ‖θu‖ in [0, π].

    The angle comes from atan2(sin, cos) so it stays accurate near 0 and π;
    close to π the axis is read from the symmetric part (R + Rᵀ)/2.
    """
    R = np.asarray(R, dtype=float)
    w = vee(R - R.T)  # 2 sin(θ) u
    s = 0.5 * np.linalg.norm(w)
    c = 0.5 * (np.trace(R) - 1.0)
    theta = float(np.arctan2(s, c))

    if theta < SMALL_ANGLE:
        return 0.5 * (1.0 + theta * theta / 6.0) * w

    if np.pi - theta > NEAR_PI:
        return (theta / (2.0 * s)) * w

    # uuᵀ = ((R + Rᵀ)/2 - cos θ I) / (1 - cos θ)
    B = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    i = int(np.argmax(np.diag(B)))
    u = B[:, i] / np.sqrt(B[i, i])
    u /= np.linalg.norm(u)
    if np.dot(u, w) < 0.0:
        u = -u
    return theta * u


def sinc(x):
    """sin(x)/x with the Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SMALL_ANGLE
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0 + x ** 4 / 120.0, np.sin(safe) / safe)


# -----------------------------------------
# Projection & frame changes
# -----------------------------------------

def project(P, cam: CameraIntrinsics) -> PixelPoint:
    """Pinhole projection: u = f_u X/Z + u_0, v = f_v Y/Z + v_0."""
    X, Y, Z = np.asarray(P, dtype=float).reshape(3)
    if Z <= 0.0:
        raise DepthBehindCamera(f"cannot project point with Z={Z:.6g} <= 0")
    return PixelPoint(cam.f_u * X / Z + cam.u_0, cam.f_v * Y / Z + cam.v_0)


def project_points(P, cam: CameraIntrinsics) -> np.ndarray:
    """
    Vectorized projection of (..., 3) camera-frame points to (..., 2) pixels.

    No depth check: callers decide what Z <= 0 means (see sim.world.observe).
    """
    P = np.asarray(P, dtype=float)
    Z = P[..., 2]
    u = cam.f_u * P[..., 0] / Z + cam.u_0
    v = cam.f_v * P[..., 1] / Z + cam.v_0
    return np.stack([u, v], axis=-1)


def transform_point(pose: RigidTransform, P) -> np.ndarray:
    """World -> camera: Rᵀ (P - t). Works on (3,) or (n, 3)."""
    P = np.asarray(P, dtype=float)
    return (P - pose.translation) @ pose.rotation


# -----------------------------------------
# Twist integration
# -----------------------------------------

def se3_exp(v, w, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form SE(3) exponential of the constant twist (v, ω) held for dt.

    Returns (ΔR, Δp) of the body-frame motion increment.
    """
    rho = np.asarray(v, dtype=float) * dt
    phi = np.asarray(w, dtype=float) * dt
    theta = float(np.linalg.norm(phi))
    Phi = skew(phi)
    Phi2 = Phi @ Phi
    dR = axis_angle_to_rotation(phi)
    if theta < SMALL_ANGLE:
        V = np.eye(3) + 0.5 * Phi + Phi2 / 6.0
    else:
        V = (
            np.eye(3)
            + ((1.0 - np.cos(theta)) / theta ** 2) * Phi
            + ((theta - np.sin(theta)) / theta ** 3) * Phi2
        )
    return dR, V @ rho


def integrate_twist(pose: RigidTransform, V: Twist, dt: float) -> RigidTransform:
    """
    Move the camera by a body-frame twist held constant for dt.

    The increment multiplies the camera pose on the right, so a static world
    point seen from the camera moves as Ṗ = -v - ω x P.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dR, dp = se3_exp(V.v, V.w, dt)
    R = orthonormalize(pose.rotation @ dR)
    t = pose.rotation @ dp + pose.translation
    return RigidTransform(R, t)


def move_points(P, V: Twist, dt: float) -> np.ndarray:
    """
    Camera-frame coordinates of static points after the camera moves by V for dt.

    Same motion as integrate_twist, seen from the camera: P' = ΔRᵀ (P - Δp).
    """
    dR, dp = se3_exp(V.v, V.w, dt)
    return (np.asarray(P, dtype=float) - dp) @ dR
