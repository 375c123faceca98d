# servo/interaction.py

from enum import Enum
from typing import Tuple

import numpy as np

from servo.geometry import CameraIntrinsics, SMALL_ANGLE, skew, sinc


# -----------------------------------------
# Errors & shared types
# -----------------------------------------

class DegenerateDepth(ValueError):
    """Depth too small to build a 2D interaction matrix."""


DEPTH_EPS = 1e-6


class IbvsCase(Enum):
    """
    How the 2D interaction matrix is approximated.

      CASE0: current features, current depth estimate
      CASE1: current features, desired depth
      CASE2: desired features, desired depth (constant)
      CASE3: mean of CASE0 and CASE2
    """
    CASE0 = 0
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3

    @classmethod
    def parse(cls, value) -> "IbvsCase":
        if isinstance(value, IbvsCase):
            return value
        if isinstance(value, str):
            value = value.strip().lower().replace("case", "").replace("#", "")
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise ValueError(f"unknown IBVS case {value!r}; expected 0, 1, 2 or 3")

    @property
    def tracks_depth(self) -> bool:
        return self in (IbvsCase.CASE0, IbvsCase.CASE3)


def _check_depths(depths) -> np.ndarray:
    Z = np.asarray(depths, dtype=float)
    if np.any(Z < DEPTH_EPS):
        raise DegenerateDepth(f"depth below {DEPTH_EPS} m: {Z.min():.3g}")
    return Z


# -----------------------------------------
# 2D point features
# -----------------------------------------

def l2d_batch(pixels, depths, cam: CameraIntrinsics) -> np.ndarray:
    """
    Pixel-unit image Jacobian for raw pixels.

    pixels: (..., n, 2), depths: (..., n) -> (..., n, 2, 6)
    Coordinates are centered on (u_0, v_0) here; callers pass raw pixels.
    """
    pixels = np.asarray(pixels, dtype=float)
    Z = np.asarray(depths, dtype=float)
    ub = pixels[..., 0] - cam.u_0
    vb = pixels[..., 1] - cam.v_0
    fu, fv = cam.f_u, cam.f_v
    zero = np.zeros_like(ub)

    row_u = np.stack(
        [-fu / Z, zero, ub / Z, ub * vb / fv, -(fu + ub * ub / fu), fu * vb / fv], axis=-1
    )
    row_v = np.stack(
        [zero, -fv / Z, vb / Z, fv + vb * vb / fv, -ub * vb / fu, -fv * ub / fu], axis=-1
    )
    return np.stack([row_u, row_v], axis=-2)


def l2d_point(p, Z: float, cam: CameraIntrinsics) -> np.ndarray:
    """2x6 interaction matrix of one pixel point at depth Z."""
    _check_depths([Z])
    return l2d_batch(np.asarray(p, dtype=float).reshape(1, 2), np.array([Z], dtype=float), cam)[0]


def stack_ibvs(points, depths, cam: CameraIntrinsics) -> np.ndarray:
    """(2n, 6) stack in feature order."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    Z = _check_depths(np.asarray(depths, dtype=float).reshape(-1))
    if len(points) == 0 or len(points) != len(Z):
        raise ValueError(f"need matching non-empty points/depths, got {len(points)} and {len(Z)}")
    return l2d_batch(points, Z, cam).reshape(-1, 6)


def ibvs_matrix_for_case(
    case: IbvsCase,
    current: Tuple[np.ndarray, np.ndarray],
    desired: Tuple[np.ndarray, np.ndarray],
    cam: CameraIntrinsics,
) -> np.ndarray:
    """Approximate ^{2d}L̂_s for one of the four cases."""
    case = IbvsCase.parse(case)
    points, depths = current
    points_star, depths_star = desired

    if case is IbvsCase.CASE0:
        return stack_ibvs(points, depths, cam)
    if case is IbvsCase.CASE1:
        return stack_ibvs(points, depths_star, cam)
    if case is IbvsCase.CASE2:
        return stack_ibvs(points_star, depths_star, cam)
    return 0.5 * (stack_ibvs(points, depths, cam) + stack_ibvs(points_star, depths_star, cam))


def back_project(pixels, depths, cam: CameraIntrinsics) -> np.ndarray:
    """Raw pixels + depths -> camera-frame points, (..., n, 3)."""
    pixels = np.asarray(pixels, dtype=float)
    Z = np.asarray(depths, dtype=float)
    X = (pixels[..., 0] - cam.u_0) * Z / cam.f_u
    Y = (pixels[..., 1] - cam.v_0) * Z / cam.f_v
    return np.stack([X, Y, Z], axis=-1)


# -----------------------------------------
# 3D point features
# -----------------------------------------

def l3d_batch(P) -> np.ndarray:
    """(..., 3) points -> (..., 3, 6) matrices [-I | [P]x]."""
    P = np.asarray(P, dtype=float)
    minus_eye = np.broadcast_to(-np.eye(3), P.shape[:-1] + (3, 3))
    return np.concatenate([minus_eye, skew(P)], axis=-1)


def l3d_point(P) -> np.ndarray:
    return l3d_batch(np.asarray(P, dtype=float).reshape(3))


def stack_3d(points) -> np.ndarray:
    """(3n, 6) stack in feature order."""
    return l3d_batch(np.asarray(points, dtype=float).reshape(-1, 3)).reshape(-1, 6)


# -----------------------------------------
# Pose features
# -----------------------------------------

def l_theta_u(theta_u) -> np.ndarray:
    """
    L_θu = I - (θ/2)[u]x + (1 - sinc θ / sinc²(θ/2)) [u]x², batched over (..., 3).

    Written in terms of W = [θu]x so θ -> 0 needs no axis; at θ = 0 this is I.
    """
    w = np.asarray(theta_u, dtype=float)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    W = skew(w)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    coef = np.where(
        small,
        1.0 / 12.0 + theta * theta / 720.0,
        (1.0 - sinc(safe) / sinc(0.5 * safe) ** 2) / (safe * safe),
    )
    return np.eye(3) - 0.5 * W + coef * (W @ W)


def l_pbvs(R, theta_u) -> np.ndarray:
    """Block-diagonal [R, 0; 0, L_θu] with R = ^{c*}R_c."""
    R = np.asarray(R, dtype=float)
    L = l_theta_u(theta_u)
    out = np.zeros(R.shape[:-2] + (6, 6))
    out[..., :3, :3] = R
    out[..., 3:, 3:] = L
    return out


def pbvs_velocity_matrix(R, theta_u) -> np.ndarray:
    """
    PBVS interaction matrix for a camera-frame twist: l_pbvs · blockdiag(I, R).

    The θu block of l_pbvs acts on the rotational velocity expressed in F_{c*};
    ω_{c*} = ^{c*}R_c ω_c. Since R θu = θu, (L_θu R)⁻¹ θu = θu still holds.
    """
    R = np.asarray(R, dtype=float)
    out = l_pbvs(R, theta_u)
    out[..., 3:, 3:] = out[..., 3:, 3:] @ R
    return out
