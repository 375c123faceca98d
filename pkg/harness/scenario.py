# harness/scenario.py
"""
Scenario configuration: YAML (or JSON) files deep-merged over config/defaults.yml.

A scenario names a scheme and controller, the desired and initial camera poses
(named entries of `poses:` or explicit {t, theta_u_deg}), the run length and
every controller/simulator knob. Validation errors are ConfigError naming the
dotted key.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from servo.classical import ClassicalGain
from servo.geometry import CameraIntrinsics, RigidTransform
from servo.mppi import MppiConfig
from servo.vscost import SCHEME_KINDS, ConstraintSpec, CostWeights, VsScheme
from sim.world import CalibrationError, GantryLimits, NoiseSpec
from utils.config import ConfigError, deep_merge, dotted, load_defaults, load_yaml

CONTROLLERS = ("classical", "mppi")


@dataclass(frozen=True)
class WorkspaceBox:
    """Uniform sampling box for initial poses (translation m, θu deg)."""
    t_min: tuple = (-0.8, -0.8, -1.4)
    t_max: tuple = (0.8, 0.8, -0.5)
    r_min_deg: tuple = (-30.0, -30.0, -155.0)
    r_max_deg: tuple = (30.0, 30.0, 155.0)
    max_attempts: int = 1000


@dataclass
class ScenarioConfig:
    name: str
    scheme: VsScheme
    controller: str
    desired_pose: RigidTransform
    initial_pose: RigidTransform
    duration_s: float
    rate_hz: float
    camera: CameraIntrinsics
    object_points: np.ndarray
    constraints: ConstraintSpec
    weights: CostWeights
    noise: NoiseSpec
    calibration: CalibrationError
    mppi: MppiConfig
    classical: ClassicalGain
    limits: GantryLimits
    workspace: WorkspaceBox
    seed: int = 0
    stop_after_converged_s: Optional[float] = None
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s * self.rate_hz))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: str = "scenario", defaults: Optional[Dict[str, Any]] = None):
        merged = deep_merge(load_defaults() if defaults is None else defaults, data or {})
        return _parse(merged, name)

    def with_overrides(self, overrides: Dict[str, Any], name: Optional[str] = None) -> "ScenarioConfig":
        """Re-parse with `overrides` merged on top of this scenario's raw mapping."""
        return _parse(deep_merge(self.raw, overrides), name or self.name)


def load_scenario(path, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    data = load_yaml(path)
    if overrides:
        data = deep_merge(data, overrides)
    return ScenarioConfig.from_dict(data, name=Path(path).stem)


# -----------------------------------------
# Parsing helpers
# -----------------------------------------

def _vec(value, key: str, n: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(key, f"must be a list of {n} numbers, got {value!r}")
    if len(arr) != n or not np.all(np.isfinite(arr)):
        raise ConfigError(key, f"must be a list of {n} finite numbers, got {value!r}")
    return arr


def _num(value, key: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"must be a number, got {value!r}")
    if not np.isfinite(out):
        raise ConfigError(key, f"must be finite, got {value!r}")
    return out


def _int(value, key: str, minimum: int = 0) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}, got {value!r}")
    return value


def _fields(sec: Dict[str, Any], key: str, vectors: Optional[Dict[str, int]] = None,
            flags: tuple = (), ints: tuple = ()) -> Dict[str, Any]:
    """Coerce a flat section: numbers, fixed-length vectors, booleans and integers by field name."""
    vectors = vectors or {}
    out = {}
    for k, v in sec.items():
        path = f"{key}.{k}"
        if v is None:
            out[k] = None
        elif k in vectors:
            out[k] = tuple(_vec(v, path, vectors[k]))
        elif k in flags:
            if not isinstance(v, bool):
                raise ConfigError(path, f"must be true or false, got {v!r}")
            out[k] = v
        elif k in ints:
            out[k] = _int(v, path)
        else:
            out[k] = _num(v, path)
    return out


def _object_points(value) -> np.ndarray:
    if value is None:
        raise ConfigError("object_points", "missing")
    try:
        pts = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("object_points", f"must be a list of [X, Y, Z] points, got {value!r}")
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 1:
        raise ConfigError("object_points", f"must be a non-empty list of [X, Y, Z] points, got {value!r}")
    if not np.all(np.isfinite(pts)):
        raise ConfigError("object_points", "must be finite")
    return pts


def parse_pose(value, key: str, named: Dict[str, Any]) -> RigidTransform:
    """A pose is a name from `poses:`, {t, theta_u_deg} or [[t], [θu deg]]."""
    if isinstance(value, str):
        if value not in named:
            raise ConfigError(key, f"unknown pose {value!r}; known: {sorted(named)}")
        return parse_pose(named[value], key, named)
    if isinstance(value, dict):
        t, r = value.get("t"), value.get("theta_u_deg")
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        t, r = value
    else:
        raise ConfigError(key, f"must be a pose name, {{t, theta_u_deg}} or [t, theta_u_deg], got {value!r}")
    try:
        return RigidTransform.from_pose_vector(_vec(t, f"{key}.t", 3), _vec(r, f"{key}.theta_u_deg", 3))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(key, str(e))


def _section(d: Dict[str, Any], key: str) -> Dict[str, Any]:
    sec = d.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(key, f"must be a mapping, got {sec!r}")
    return sec


def _build(factory, key: str, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(key, str(e))


def _parse(d: Dict[str, Any], name: str) -> ScenarioConfig:
    named = _section(d, "poses")

    # scheme / controller
    kind = str(d.get("scheme", "ibvs")).lower()
    if kind not in SCHEME_KINDS:
        raise ConfigError("scheme", f"must be one of {SCHEME_KINDS}, got {kind!r}")
    try:
        scheme = VsScheme(kind, d.get("ibvs_case", 0) if kind == "ibvs" else None)
    except ValueError as e:
        raise ConfigError("ibvs_case", str(e))
    controller = str(d.get("controller", "mppi")).lower()
    if controller not in CONTROLLERS:
        raise ConfigError("controller", f"must be one of {CONTROLLERS}, got {controller!r}")

    # timing
    rate_hz = _num(d.get("rate_hz", 50), "rate_hz")
    if rate_hz <= 0:
        raise ConfigError("rate_hz", f"must be > 0, got {rate_hz}")
    duration = d.get("duration_s")
    if duration is None:
        duration = dotted(d, f"durations.{controller}", 90.0)
    duration_s = _num(duration, "duration_s")
    if duration_s <= 0:
        raise ConfigError("duration_s", f"must be > 0, got {duration_s}")

    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", f"must be a nonnegative integer, got {seed!r}")

    cam = _build(CameraIntrinsics, "camera", **_fields(_section(d, "camera"), "camera"))
    object_points = _object_points(d.get("object_points"))

    desired_pose = parse_pose(d.get("desired", "c1"), "desired", named)
    initial_pose = parse_pose(d.get("initial", d.get("desired", "c1")), "initial", named)

    # constraints / weights
    cons = _fields(
        _section(d, "constraints"),
        "constraints",
        vectors={"s_min": 2, "s_max": 2, "p_min": 3, "p_max": 3},
        flags=("visibility", "fov_penalty"),
    )
    if cons.get("s_min") is None:
        cons["s_min"] = (0.0, 0.0)
    if cons.get("s_max") is None:
        cons["s_max"] = (cam.width, cam.height)
    constraints = _build(ConstraintSpec, "constraints", **cons)

    scheme_defaults = _section(_section(d, "mppi_schemes"), kind) if "mppi_schemes" in d else {}
    mppi_raw = _section(d, "mppi")
    q = mppi_raw.get("q")
    if q is None:
        q = scheme_defaults.get("q", 2.5 if kind == "ibvs" else 35.0)
    if isinstance(q, (list, tuple)):
        q = tuple(_vec(q, "mppi.q", len(q)))
    else:
        q = _num(q, "mppi.q")
    weights = _build(CostWeights, "mppi.q", q=q)

    mppi = _parse_mppi(mppi_raw, scheme_defaults, rate_hz, seed)

    noise_raw = _fields(_section(d, "noise"), "noise", ints=("seed",))
    if noise_raw.get("seed") is None:
        noise_raw["seed"] = seed
    for k in ("pixel", "depth"):
        if noise_raw.get(k) is None:
            noise_raw.pop(k, None)
        elif noise_raw[k] < 0:
            raise ConfigError(f"noise.{k}", f"amplitude must be >= 0, got {noise_raw[k]}")
    noise = _build(NoiseSpec, "noise", **noise_raw)

    calibration = _build(CalibrationError, "calibration", **_fields(_section(d, "calibration"), "calibration"))
    classical = _build(ClassicalGain, "classical.lambda_s", **_fields(_section(d, "classical"), "classical"))

    box3 = {"t_min": 3, "t_max": 3, "r_min_deg": 3, "r_max_deg": 3}
    limits = _build(GantryLimits, "limits", **_fields(_section(d, "limits"), "limits", vectors=box3))
    if np.any(np.asarray(limits.t_min) >= np.asarray(limits.t_max)) or np.any(
        np.asarray(limits.r_min_deg) >= np.asarray(limits.r_max_deg)
    ):
        raise ConfigError("limits", "min must be < max on every axis")

    ws = _fields(_section(d, "workspace"), "workspace", vectors=box3, ints=("max_attempts",))
    workspace = _build(WorkspaceBox, "workspace", **ws)

    stop = d.get("stop_after_converged_s")
    if stop is not None:
        stop = _num(stop, "stop_after_converged_s")
        if stop <= 0:
            raise ConfigError("stop_after_converged_s", f"must be > 0, got {stop}")

    return ScenarioConfig(
        name=name,
        scheme=scheme,
        controller=controller,
        desired_pose=desired_pose,
        initial_pose=initial_pose,
        duration_s=duration_s,
        rate_hz=rate_hz,
        camera=cam,
        object_points=object_points,
        constraints=constraints,
        weights=weights,
        noise=noise,
        calibration=calibration,
        mppi=mppi,
        classical=classical,
        limits=limits,
        workspace=workspace,
        seed=seed,
        stop_after_converged_s=stop,
        raw=d,
    )


def _parse_mppi(m: Dict[str, Any], scheme_defaults: Dict[str, Any], rate_hz: float, seed: int) -> MppiConfig:
    lam = m.get("lambda")
    if lam is None:
        lam = scheme_defaults.get("lambda", 100.0)

    T = m.get("horizon_steps")
    if T is None:
        T = int(round(_num(m.get("horizon_s", 3.5), "mppi.horizon_s") * rate_hz))
    if not isinstance(T, int) or isinstance(T, bool):
        raise ConfigError("mppi.horizon_steps", f"must be an integer, got {T!r}")

    K = m.get("samples", 500)
    if not isinstance(K, int) or isinstance(K, bool):
        raise ConfigError("mppi.samples", f"must be an integer, got {K!r}")

    workers = m.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool):
        raise ConfigError("mppi.workers", f"must be an integer, got {workers!r}")

    def bound(key):
        val = m.get(key)
        return None if val is None else _vec(val, f"mppi.{key}", 6)

    R = m.get("control_weight")
    if R is not None:
        try:
            R = np.asarray(R, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("mppi.control_weight", f"must be a number, a list or a 6x6 matrix, got {R!r}")
        if not np.all(np.isfinite(R)):
            raise ConfigError("mppi.control_weight", "must be finite")

    return MppiConfig(
        samples=K,
        horizon_steps=T,
        dt=1.0 / rate_hz,
        lam=_num(lam, "mppi.lambda"),
        nu=_num(m.get("nu", 1000.0), "mppi.nu"),
        sigma_u=_vec(m.get("sigma_u", [0.02, 0.01, 0.01, 0.02, 0.02, 0.01]), "mppi.sigma_u", 6),
        control_weight=R,
        v_min=bound("v_min"),
        v_max=bound("v_max"),
        seed=seed,
        workers=workers,
    )
