# servo/mppi.py
"""
Sampling-based path-integral MPC, independent of the servoing scheme.

Each control cycle draws K perturbation sequences, rolls the model forward
under every one of them, and moves the nominal sequence toward the
perturbations with exponentially weighted costs. The first control is applied
and the rest is shifted to warm-start the next cycle.

States are batched as (K, n) arrays and controls as (K, m): the dynamics and
running-cost callables in a RolloutProblem must accept those shapes.
"""

from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from utils.config import ConfigError

# Cost assigned to rollouts whose state went non-finite; exp(-(S - min)/λ) is 0 for it.
SENTINEL_COST = 1e18

# Exploration variance per channel (vx, vy, vz, wx, wy, wz)
DEFAULT_SIGMA_U = (0.02, 0.01, 0.01, 0.02, 0.02, 0.01)


# -----------------------------------------
# Config
# -----------------------------------------

@dataclass
class MppiConfig:
    samples: int = 500            # K
    horizon_steps: int = 175      # T
    dt: float = 0.02
    lam: float = 100.0            # λ
    nu: float = 1000.0            # ν
    sigma_u: Sequence[float] = DEFAULT_SIGMA_U   # diagonal of Σ_u (variances)
    control_weight: Optional[np.ndarray] = None  # R; None -> ½λΣ_u⁻¹
    v_min: Optional[Sequence[float]] = None
    v_max: Optional[Sequence[float]] = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.sigma_u = np.asarray(self.sigma_u, dtype=float).reshape(-1)
        m = len(self.sigma_u)

        if int(self.samples) < 1:
            raise ConfigError("mppi.samples", f"must be >= 1, got {self.samples}")
        if int(self.horizon_steps) < 1:
            raise ConfigError("mppi.horizon_steps", f"must be >= 1, got {self.horizon_steps}")
        if not self.dt > 0:
            raise ConfigError("mppi.dt", f"must be > 0, got {self.dt}")
        if not self.lam > 0:
            raise ConfigError("mppi.lambda", f"must be > 0, got {self.lam}")
        if not self.nu > 0:
            raise ConfigError("mppi.nu", f"must be > 0, got {self.nu}")
        if m == 0 or not np.all(np.isfinite(self.sigma_u)) or np.any(self.sigma_u < 0):
            raise ConfigError("mppi.sigma_u", f"must be a non-empty list of variances >= 0, got {self.sigma_u.tolist()}")
        if self.control_weight is None and np.any(self.sigma_u == 0):
            raise ConfigError("mppi.sigma_u", "must be > 0 when mppi.control_weight is not given")
        if int(self.workers) < 1:
            raise ConfigError("mppi.workers", f"must be >= 1, got {self.workers}")
        if int(self.seed) < 0:
            raise ConfigError("mppi.seed", f"must be >= 0, got {self.seed}")

        self.samples = int(self.samples)
        self.horizon_steps = int(self.horizon_steps)
        self.workers = int(self.workers)
        self.seed = int(self.seed)

        if (self.v_min is None) != (self.v_max is None):
            key = "mppi.v_max" if self.v_max is None else "mppi.v_min"
            raise ConfigError(key, "must be set together with its counterpart")
        if self.v_min is not None:
            self.v_min = np.asarray(self.v_min, dtype=float).reshape(-1)
            self.v_max = np.asarray(self.v_max, dtype=float).reshape(-1)
            if len(self.v_min) != m or len(self.v_max) != m:
                raise ConfigError("mppi.v_max", f"bounds must have {m} entries")
            if np.any(self.v_min >= self.v_max):
                raise ConfigError("mppi.v_min", "must be < mppi.v_max elementwise")

        if self.control_weight is not None:
            R = np.asarray(self.control_weight, dtype=float)
            if R.ndim < 2:
                R = np.diag(np.broadcast_to(R, (m,)))
            if R.shape != (m, m):
                raise ConfigError("mppi.control_weight", f"must be {m}x{m}, got {R.shape}")
            self.control_weight = R

    @property
    def control_dim(self) -> int:
        return len(self.sigma_u)

    @property
    def bounded(self) -> bool:
        return self.v_min is not None

    @property
    def R(self) -> np.ndarray:
        if self.control_weight is not None:
            return self.control_weight
        return 0.5 * self.lam * np.diag(1.0 / self.sigma_u)


@dataclass
class RolloutProblem:
    """
    dynamics(x: (K, n), v: (K, m), dt) -> (K, n); non-finite rows mark a diverged sample.
    running_cost(x: (K, n)) -> (K,); terminal_cost likewise, or None for φ ≡ 0.
    constraint_cost(x: (K, n)) -> (K,) penalty of a violated constraint, or None.

    The constraint penalty is checked on every predicted state s_1..s_T and
    latches: once a sample violates, it pays the largest penalty seen so far
    on every remaining step of its horizon.
    """
    dynamics: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    running_cost: Callable[[np.ndarray], np.ndarray]
    terminal_cost: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraint_cost: Optional[Callable[[np.ndarray], np.ndarray]] = None


# -----------------------------------------
# Building blocks
# -----------------------------------------

def sample_perturbations(cfg: MppiConfig, step_index: int = 0) -> np.ndarray:
    """(K, T, m) draws of N(0, Σ_u); the stream is fixed by (cfg.seed, step_index)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, int(step_index)]))
    noise = rng.standard_normal((cfg.samples, cfg.horizon_steps, cfg.control_dim))
    return noise * np.sqrt(cfg.sigma_u)


def clamp_control(v, v_min, v_max) -> np.ndarray:
    """g(v) = max(v_min, min(v, v_max)), elementwise."""
    return np.maximum(v_min, np.minimum(v, v_max))


def control_cost(u, du, cfg: MppiConfig):
    """
    ((1 - 1/ν)/2) δuᵀRδu + uᵀRδu + ½uᵀRu over the last axis.

    Broadcasts, so (T, m) against (K, T, m) gives a (K, T) array.
    """
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    R = cfg.R
    Rdu = np.einsum("...j,ij->...i", du, R)
    return (
        0.5 * (1.0 - 1.0 / cfg.nu) * np.sum(du * Rdu, axis=-1)
        + np.sum(u * Rdu, axis=-1)
        + 0.5 * np.sum(u * np.einsum("...j,ij->...i", u, R), axis=-1)
    )


def rollout_batch(s0, U, dU, problem: RolloutProblem, cfg: MppiConfig) -> np.ndarray:
    """Costs S̃ of the rollouts seeded by dU (k, T, m); one entry per sample."""
    U = np.asarray(U, dtype=float)
    dU = np.asarray(dU, dtype=float)
    k = dU.shape[0]
    x = np.repeat(np.asarray(s0, dtype=float).reshape(1, -1), k, axis=0)
    costs = np.zeros(k)
    latched = np.zeros(k)
    alive = np.ones(k, dtype=bool)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(U.shape[0]):
            costs += np.broadcast_to(problem.running_cost(x), (k,))
            v = U[t] + dU[:, t]
            if cfg.bounded:
                v = clamp_control(v, cfg.v_min, cfg.v_max)
            x_next = problem.dynamics(x, v, cfg.dt)
            ok = np.all(np.isfinite(x_next), axis=1)
            alive &= ok
            x = np.where(ok[:, None], x_next, x)
            if problem.constraint_cost is not None:
                latched = np.maximum(latched, np.broadcast_to(problem.constraint_cost(x), (k,)))
                costs += latched

        costs += np.sum(control_cost(U[None], dU, cfg), axis=1)
        if problem.terminal_cost is not None:
            costs += np.broadcast_to(problem.terminal_cost(x), (k,))

    costs[~alive] = SENTINEL_COST
    costs[~np.isfinite(costs)] = SENTINEL_COST
    return costs


def rollout(s0, U, dU, dynamics, running_cost, terminal_cost, cfg: MppiConfig) -> float:
    """S̃ of a single perturbation sequence dU (T, m)."""
    problem = RolloutProblem(dynamics, running_cost, terminal_cost)
    return float(rollout_batch(s0, U, np.asarray(dU, dtype=float)[None], problem, cfg)[0])


def evaluate_rollouts(
    s0, U, dU, problem: RolloutProblem, cfg: MppiConfig, executor: Optional[Executor] = None
) -> np.ndarray:
    """All K costs. With an executor, contiguous chunks run concurrently and are joined in order."""
    K = dU.shape[0]
    n_chunks = min(cfg.workers, K)
    if executor is None or n_chunks <= 1:
        return rollout_batch(s0, U, dU, problem, cfg)

    bounds = np.linspace(0, K, n_chunks + 1).astype(int)
    parts = executor.map(
        lambda ab: rollout_batch(s0, U, dU[ab[0]:ab[1]], problem, cfg),
        zip(bounds[:-1], bounds[1:]),
    )
    return np.concatenate(list(parts))


def update_controls(U, costs, dU, lam: float) -> np.ndarray:
    """u_t += Σ_k w_k δu_{t,k} / Σ_k w_k with w_k = exp(-(S̃_k - min S̃)/λ)."""
    costs = np.asarray(costs, dtype=float)
    w = np.exp(-(costs - costs.min()) / lam)
    return np.asarray(U, dtype=float) + np.tensordot(w, dU, axes=(0, 0)) / w.sum()


def shift_sequence(U) -> np.ndarray:
    """Drop u_0, slide the rest down and repeat the last control in the tail."""
    U = np.asarray(U, dtype=float)
    return np.concatenate([U[1:], U[-1:]], axis=0)


def mppi_step(
    s0,
    U,
    problem: RolloutProblem,
    cfg: MppiConfig,
    step_index: int = 0,
    executor: Optional[Executor] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """One control cycle -> (u0 to apply, warm-started sequence)."""
    dU = sample_perturbations(cfg, step_index)
    costs = evaluate_rollouts(s0, U, dU, problem, cfg, executor)
    U_new = update_controls(U, costs, dU, cfg.lam)
    u0 = U_new[0].copy()
    if cfg.bounded:
        u0 = clamp_control(u0, cfg.v_min, cfg.v_max)
    return u0, shift_sequence(U_new)


# -----------------------------------------
# Engine
# -----------------------------------------

@dataclass
class MppiEngine:
    """Nominal sequence + step counter for one control loop."""
    cfg: MppiConfig
    U: np.ndarray = field(init=False)
    step_index: int = field(init=False, default=0)
    _pool: Optional[ThreadPoolExecutor] = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.reset()

    def reset(self):
        self.U = np.zeros((self.cfg.horizon_steps, self.cfg.control_dim))
        self.step_index = 0

    def step(self, x0, problem: RolloutProblem) -> np.ndarray:
        if self.cfg.workers > 1 and self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.cfg.workers)
        u0, self.U = mppi_step(x0, self.U, problem, self.cfg, self.step_index, self._pool)
        self.step_index += 1
        return u0

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
