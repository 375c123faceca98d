# servo/vscost.py
"""
Scheme-specific state layouts, prediction models and running costs for MPPI-VS.

State layouts (flat vectors, batched as (K, n) inside rollouts):

  ibvs      (u1, v1, ..., un, vn) pixels, then Ẑ1..Ẑn for cases 0 and 3
  3dvs      (X1, Y1, Z1, ..., Xn, Yn, Zn) camera-frame points
  pbvs      (^{c*}t_c, θu); with the FoV penalty the 3D points follow
  pbvs_aug  (^{c*}t_c, θu, X1, Y1, Z1, ...)
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from servo.geometry import CameraIntrinsics, Twist, axis_angle_to_rotation
from servo.interaction import (
    DEPTH_EPS,
    IbvsCase,
    back_project,
    l2d_batch,
    l3d_batch,
    pbvs_velocity_matrix,
)
from servo.mppi import RolloutProblem

SCHEME_KINDS = ("ibvs", "3dvs", "pbvs", "pbvs_aug")

# Overflow guard for the exponential FoV penalty; exp(700) is still finite.
_MAX_EXPONENT = 700.0


# -----------------------------------------
# Types
# -----------------------------------------

@dataclass(frozen=True)
class VsScheme:
    kind: str
    case: Optional[IbvsCase] = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEME_KINDS}")
        if self.kind == "ibvs":
            object.__setattr__(self, "case", IbvsCase.parse(0 if self.case is None else self.case))
        elif self.case is not None:
            raise ValueError(f"scheme {self.kind!r} takes no IBVS case")

    @classmethod
    def ibvs(cls, case=0) -> "VsScheme":
        return cls("ibvs", IbvsCase.parse(case))

    @classmethod
    def three_d(cls) -> "VsScheme":
        return cls("3dvs")

    @classmethod
    def pbvs(cls) -> "VsScheme":
        return cls("pbvs")

    @classmethod
    def pbvs_augmented(cls) -> "VsScheme":
        return cls("pbvs_aug")

    @property
    def label(self) -> str:
        if self.kind == "ibvs":
            return f"IBVS#{self.case.value}"
        return {"3dvs": "3DVS", "pbvs": "PBVS", "pbvs_aug": "PBVS-aug"}[self.kind]

    @property
    def is_pose_based(self) -> bool:
        return self.kind in ("pbvs", "pbvs_aug")

    @property
    def error_threshold(self) -> float:
        """Convergence band on the error norm: 0.6 px for IBVS, 3 mm otherwise."""
        return 0.6 if self.kind == "ibvs" else 3e-3


@dataclass(frozen=True)
class ConstraintSpec:
    s_min: Tuple[float, float] = (0.0, 0.0)
    s_max: Tuple[float, float] = (640.0, 480.0)
    visibility: bool = True                       # C1 term for IBVS
    p_min: Optional[Tuple[float, float, float]] = None
    p_max: Optional[Tuple[float, float, float]] = None
    z_max: Optional[float] = None                 # camera-frame depth bound [m]
    fov_penalty: bool = False                     # PBVS exponential FoV penalty
    x_max: Optional[float] = None                 # None -> image half-extent on the normalized plane
    y_max: Optional[float] = None
    c1: float = 1e7
    c2: float = 1e5
    beta: float = 150.0
    alpha: float = 1e3
    w1: float = 35.0
    w2: float = 150.0

    def __post_init__(self):
        if not (self.s_min[0] < self.s_max[0] and self.s_min[1] < self.s_max[1]):
            raise ValueError(f"s_min {self.s_min} must be < s_max {self.s_max}")
        if self.z_max is not None and not (np.isfinite(self.z_max) and self.z_max > 0):
            raise ValueError(f"z_max must be a finite positive depth, got {self.z_max}")
        if (self.p_min is None) != (self.p_max is None):
            raise ValueError("p_min and p_max must be given together")
        if self.p_min is not None and np.any(np.asarray(self.p_min) >= np.asarray(self.p_max)):
            raise ValueError(f"p_min {self.p_min} must be < p_max {self.p_max}")
        for name in ("c1", "c2", "beta", "alpha", "w1", "w2"):
            value = getattr(self, name)
            if isinstance(value, (bool, str)) or not isinstance(value, (int, float, np.number)):
                raise ValueError(f"{name} must be a number, got {value!r}")
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, float(value))

    def with_camera(self, cam: CameraIntrinsics) -> "ConstraintSpec":
        """Fill unset normalized-plane bounds from the image size."""
        x_max, y_max = cam.normalized_half_extent
        return replace(
            self,
            x_max=x_max if self.x_max is None else self.x_max,
            y_max=y_max if self.y_max is None else self.y_max,
        )


@dataclass(frozen=True)
class CostWeights:
    """Diagonal of Q; a scalar means q·I."""
    q: Union[float, Tuple[float, ...]] = 2.5

    def diag(self, n: int) -> np.ndarray:
        q = np.asarray(self.q, dtype=float)
        d = np.full(n, float(q)) if q.ndim == 0 else q.reshape(-1)
        if len(d) != n:
            raise ValueError(f"Q diagonal has {len(d)} entries, state has {n}")
        if np.any(d < 0):
            raise ValueError("Q diagonal must be nonnegative")
        return d


@dataclass
class VsObservation:
    """What a controller sees at one control step (controller-side estimates)."""
    pixels: np.ndarray        # (n, 2)
    depths: np.ndarray        # (n,)   Ẑ
    points: np.ndarray        # (n, 3) back-projected with Γ̂
    pose_t: np.ndarray        # ^{c*}t_c
    pose_theta_u: np.ndarray  # θu of ^{c*}R_c


# -----------------------------------------
# Prediction
# -----------------------------------------

def predict_step(s, v, dt: float, L) -> np.ndarray:
    """s' = s + L̂ v Δt."""
    v = v.as_vector() if isinstance(v, Twist) else np.asarray(v, dtype=float)
    return np.asarray(s, dtype=float) + (np.asarray(L, dtype=float) @ v) * dt


def _apply(L, v) -> np.ndarray:
    """Row-wise L·v for L (K, ..., 6) and v (K, 6)."""
    extra = L.ndim - v.ndim
    return np.sum(L * v.reshape(v.shape[:1] + (1,) * extra + v.shape[1:]), axis=-1)


def _advance_points(P, v, dt: float) -> np.ndarray:
    """(K, n, 3) camera-frame points under camera twists v (K, 6)."""
    return P + _apply(l3d_batch(P), v) * dt


# -----------------------------------------
# Costs
# -----------------------------------------

def quadratic_state_cost(s, s_star, Q):
    """(s - s*)ᵀ Q (s - s*); Q is a diagonal vector or a full matrix."""
    e = np.asarray(s, dtype=float) - np.asarray(s_star, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 2:
        return np.sum(e * np.einsum("...j,ij->...i", e, Q), axis=-1)
    return np.sum(Q * e * e, axis=-1)


def _three_d_violation(points, depths, spec: ConstraintSpec, batch_shape) -> np.ndarray:
    hit = np.zeros(batch_shape, dtype=bool)
    if spec.z_max is not None and depths is not None:
        hit |= np.any(np.asarray(depths) > spec.z_max, axis=-1)
    if spec.p_min is not None and points is not None:
        P = np.asarray(points)
        outside = (P < np.asarray(spec.p_min)) | (P > np.asarray(spec.p_max))
        hit |= np.any(outside, axis=(-2, -1))
    return hit


def ibvs_indicator_cost(pixels, depths, spec: ConstraintSpec, points=None):
    """
    c1·C1 + c2·C2 for flat pixel vectors (..., 2n).

    C1: some feature outside [s_min, s_max] (or not finite).
    C2: some depth above z_max, or some 3D point outside [p_min, p_max].
    """
    pix = np.asarray(pixels, dtype=float)
    u, v = pix[..., 0::2], pix[..., 1::2]
    batch_shape = pix.shape[:-1]

    c1 = np.zeros(batch_shape, dtype=bool)
    if spec.visibility:
        outside = (
            (u < spec.s_min[0]) | (u > spec.s_max[0])
            | (v < spec.s_min[1]) | (v > spec.s_max[1])
            | ~np.isfinite(u) | ~np.isfinite(v)
        )
        c1 = np.any(outside, axis=-1)

    c2 = _three_d_violation(points, depths, spec, batch_shape)
    return spec.c1 * c1 + spec.c2 * c2


def pbvs_exponential_penalty(xy, spec: ConstraintSpec):
    """β Σ_i [exp(-α(x_max - |x_i|)) + exp(-α(y_max - |y_i|))] for (..., n, 2) normalized points."""
    if spec.x_max is None or spec.y_max is None:
        raise ValueError("x_max/y_max unset; call ConstraintSpec.with_camera first")
    xy = np.asarray(xy, dtype=float)
    ex = np.minimum(-spec.alpha * (spec.x_max - np.abs(xy[..., 0])), _MAX_EXPONENT)
    ey = np.minimum(-spec.alpha * (spec.y_max - np.abs(xy[..., 1])), _MAX_EXPONENT)
    return spec.beta * np.sum(np.exp(ex) + np.exp(ey), axis=-1)


def pbvs_augmented_cost(s, s_star, w1: float, w2: float):
    """w1 ‖pose error‖² + w2 ‖3D point error‖²."""
    e = np.asarray(s, dtype=float) - np.asarray(s_star, dtype=float)
    return w1 * np.sum(e[..., :6] ** 2, axis=-1) + w2 * np.sum(e[..., 6:] ** 2, axis=-1)


def build_constraint_cost(
    scheme: VsScheme,
    spec: ConstraintSpec,
    cam: CameraIntrinsics,
    n_points: int,
) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    """The indicator part of q(s) alone; None when the scheme carries no indicator."""
    n = n_points

    if scheme.kind == "ibvs":
        with_depth = scheme.case.tracks_depth

        def penalty(x):
            pix = x[..., : 2 * n]
            depths = x[..., 2 * n:] if with_depth else None
            points = None
            if with_depth and spec.p_min is not None:
                points = back_project(pix.reshape(pix.shape[:-1] + (n, 2)), depths, cam)
            return ibvs_indicator_cost(pix, depths, spec, points)

        return penalty

    if scheme.kind == "3dvs":
        if spec.z_max is None and spec.p_min is None:
            return None

        def penalty(x):
            P = x.reshape(x.shape[:-1] + (n, 3))
            return spec.c2 * _three_d_violation(P, P[..., 2], spec, x.shape[:-1])

        return penalty

    return None


def build_running_cost(
    scheme: VsScheme,
    spec: ConstraintSpec,
    weights: CostWeights,
    goal,
    cam: CameraIntrinsics,
    n_points: int,
    indicators: bool = True,
) -> Callable[[np.ndarray], np.ndarray]:
    """
    q(s) closure over batched states; zero at the goal when nothing is violated.

    indicators=False leaves out the c1/c2 terms (see build_constraint_cost).
    """
    goal = np.asarray(goal, dtype=float)
    n = n_points
    penalty = build_constraint_cost(scheme, spec, cam, n) if indicators else None

    def with_penalty(base):
        if penalty is None:
            return base
        return lambda x: base(x) + penalty(x)

    if scheme.kind == "ibvs":
        q_diag = weights.diag(2 * n)
        return with_penalty(lambda x: quadratic_state_cost(x[..., : 2 * n], goal[: 2 * n], q_diag))

    if scheme.kind == "3dvs":
        q_diag = weights.diag(3 * n)
        return with_penalty(lambda x: quadratic_state_cost(x, goal, q_diag))

    if scheme.kind == "pbvs":
        q_diag = weights.diag(6)
        if not spec.fov_penalty:
            return lambda x: quadratic_state_cost(x[..., :6], goal[:6], q_diag)

        bounded = spec.with_camera(cam)

        def cost(x):
            P = x[..., 6:].reshape(x.shape[:-1] + (n, 3))
            xy = P[..., :2] / P[..., 2:3]
            return quadratic_state_cost(x[..., :6], goal[:6], q_diag) + pbvs_exponential_penalty(xy, bounded)

        return cost

    return lambda x: pbvs_augmented_cost(x, goal, spec.w1, spec.w2)


# -----------------------------------------
# Model
# -----------------------------------------

@dataclass
class VsModel:
    """
    Everything MPPI needs for one scheme: goal state, batched dynamics and q(s).

    `cam` holds the controller's intrinsics Γ̂, not the true camera.
    """
    scheme: VsScheme
    cam: CameraIntrinsics
    spec: ConstraintSpec
    weights: CostWeights
    desired_pixels: np.ndarray
    desired_depths: np.ndarray
    desired_points: np.ndarray
    goal: np.ndarray = field(init=False)
    running_cost: Callable[[np.ndarray], np.ndarray] = field(init=False, repr=False)
    state_cost: Callable[[np.ndarray], np.ndarray] = field(init=False, repr=False)
    constraint_cost: Optional[Callable[[np.ndarray], np.ndarray]] = field(init=False, default=None, repr=False)
    _l_star: Optional[np.ndarray] = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.desired_pixels = np.asarray(self.desired_pixels, dtype=float).reshape(-1, 2)
        self.desired_depths = np.asarray(self.desired_depths, dtype=float).reshape(-1)
        self.desired_points = np.asarray(self.desired_points, dtype=float).reshape(-1, 3)
        self.goal = self.state_from(
            VsObservation(
                pixels=self.desired_pixels,
                depths=self.desired_depths,
                points=self.desired_points,
                pose_t=np.zeros(3),
                pose_theta_u=np.zeros(3),
            )
        )
        self.running_cost = build_running_cost(
            self.scheme, self.spec, self.weights, self.goal, self.cam, self.n_points
        )
        self.state_cost = build_running_cost(
            self.scheme, self.spec, self.weights, self.goal, self.cam, self.n_points, indicators=False
        )
        self.constraint_cost = build_constraint_cost(self.scheme, self.spec, self.cam, self.n_points)
        if self.scheme.kind == "ibvs" and self.scheme.case in (IbvsCase.CASE2, IbvsCase.CASE3):
            self._l_star = l2d_batch(self.desired_pixels, self.desired_depths, self.cam)

    # ---- layout ----
    @property
    def n_points(self) -> int:
        return len(self.desired_pixels)

    @property
    def carries_depth(self) -> bool:
        return self.scheme.kind == "ibvs" and self.scheme.case.tracks_depth

    @property
    def carries_points(self) -> bool:
        return self.scheme.kind == "pbvs_aug" or (self.scheme.kind == "pbvs" and self.spec.fov_penalty)

    @property
    def state_dim(self) -> int:
        return len(self.goal)

    def state_from(self, obs: VsObservation) -> np.ndarray:
        kind = self.scheme.kind
        if kind == "ibvs":
            parts = [np.asarray(obs.pixels, dtype=float).reshape(-1)]
            if self.carries_depth:
                parts.append(np.asarray(obs.depths, dtype=float).reshape(-1))
            return np.concatenate(parts)
        if kind == "3dvs":
            return np.asarray(obs.points, dtype=float).reshape(-1)
        parts = [np.asarray(obs.pose_t, dtype=float).reshape(3), np.asarray(obs.pose_theta_u, dtype=float).reshape(3)]
        if self.carries_points:
            parts.append(np.asarray(obs.points, dtype=float).reshape(-1))
        return np.concatenate(parts)

    # ---- dynamics ----
    def dynamics(self, x, v, dt: float) -> np.ndarray:
        """Batched one-step prediction; rows whose depth drops below DEPTH_EPS come back NaN."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        kind = self.scheme.kind
        if kind == "ibvs":
            return self._ibvs_dynamics(x, v, dt)
        if kind == "3dvs":
            P = x.reshape(x.shape[0], -1, 3)
            return _mark_degenerate(_advance_points(P, v, dt)).reshape(x.shape)
        return self._pbvs_dynamics(x, v, dt)

    def _ibvs_dynamics(self, x, v, dt):
        K, n = x.shape[0], self.n_points
        pix = x[:, : 2 * n].reshape(K, n, 2)
        if self.carries_depth:
            Z = x[:, 2 * n:]
        else:
            Z = np.broadcast_to(self.desired_depths, (K, n))

        case = self.scheme.case
        if case is IbvsCase.CASE2:
            L = np.broadcast_to(self._l_star, (K,) + self._l_star.shape)
        elif case is IbvsCase.CASE3:
            L = 0.5 * (l2d_batch(pix, Z, self.cam) + self._l_star)
        else:
            L = l2d_batch(pix, Z, self.cam)

        pix_next = x[:, : 2 * n] + _apply(L, v).reshape(K, 2 * n) * dt
        if not self.carries_depth:
            return pix_next

        # Third row of the 3D-point matrix: Ż = -v_z - Y ω_x + X ω_y
        P = back_project(pix, Z, self.cam)
        Z_dot = -v[:, 2:3] - P[..., 1] * v[:, 3:4] + P[..., 0] * v[:, 4:5]
        Z_next = Z + Z_dot * dt
        out = np.concatenate([pix_next, Z_next], axis=1)
        out[np.any(Z_next < DEPTH_EPS, axis=1)] = np.nan
        return out

    def _pbvs_dynamics(self, x, v, dt):
        K = x.shape[0]
        theta_u = x[:, 3:6]
        M = pbvs_velocity_matrix(axis_angle_to_rotation(theta_u), theta_u)
        pose_next = x[:, :6] + _apply(M, v) * dt
        if not self.carries_points:
            return pose_next
        P = _mark_degenerate(_advance_points(x[:, 6:].reshape(K, -1, 3), v, dt))
        out = np.concatenate([pose_next, P.reshape(K, -1)], axis=1)
        out[~np.all(np.isfinite(P.reshape(K, -1)), axis=1)] = np.nan
        return out

    def predict(self, state, twist: Twist, dt: float) -> np.ndarray:
        v = twist.as_vector() if isinstance(twist, Twist) else np.asarray(twist, dtype=float)
        return self.dynamics(np.asarray(state, dtype=float)[None], v[None], dt)[0]

    # ---- evaluation ----
    def cost(self, state) -> float:
        return float(self.running_cost(np.asarray(state, dtype=float)))

    def error_norm(self, state) -> float:
        s = np.asarray(state, dtype=float)
        if self.scheme.kind == "ibvs":
            k = 2 * self.n_points
            return float(np.linalg.norm(s[:k] - self.goal[:k]))
        if self.scheme.kind == "3dvs":
            return float(np.linalg.norm(s - self.goal))
        return float(np.linalg.norm(s[:6]))

    def problem(self) -> RolloutProblem:
        """Rollout bindings: indicators go through the latched constraint channel."""
        return RolloutProblem(
            dynamics=self.dynamics, running_cost=self.state_cost, constraint_cost=self.constraint_cost
        )


def _mark_degenerate(P) -> np.ndarray:
    """NaN out every sample (axis 0) that has a point below DEPTH_EPS."""
    bad = np.any(P[..., 2] < DEPTH_EPS, axis=-1)
    P = P.copy()
    P[bad] = np.nan
    return P


def build_model(
    scheme: VsScheme,
    cam_hat: CameraIntrinsics,
    desired: VsObservation,
    spec: Optional[ConstraintSpec] = None,
    weights: Optional[CostWeights] = None,
) -> VsModel:
    """Model around the desired observation s* (pixels, depths Z*, points P*)."""
    spec = spec or ConstraintSpec(s_max=(cam_hat.width, cam_hat.height))
    if weights is None:
        weights = CostWeights(q=2.5 if scheme.kind == "ibvs" else 35.0)
    if scheme.kind == "pbvs" and spec.fov_penalty:
        spec = spec.with_camera(cam_hat)
    return VsModel(
        scheme=scheme,
        cam=cam_hat,
        spec=spec,
        weights=weights,
        desired_pixels=desired.pixels,
        desired_depths=desired.depths,
        desired_points=desired.points,
    )
