# harness/poses.py

from typing import List, Optional

import numpy as np

from harness.scenario import WorkspaceBox
from servo.geometry import CameraIntrinsics, RigidTransform
from sim.world import DEFAULT_OBJECT_POINTS, GantryLimits, World, observe
from utils.config import ConfigError


class PoseSamplingError(ConfigError):
    def __init__(self, message: str):
        super().__init__("workspace", message)


def pose_is_admissible(
    pose: RigidTransform,
    limits: GantryLimits,
    camera: CameraIntrinsics,
    object_points: Optional[np.ndarray] = None,
) -> bool:
    """Inside the joint limits with every feature in the image."""
    if not limits.contains(pose):
        return False
    points = DEFAULT_OBJECT_POINTS if object_points is None else object_points
    return bool(np.all(observe(World(pose, camera, points)).visible))


def sample_initial_poses(
    n: int,
    seed: int,
    box: WorkspaceBox = WorkspaceBox(),
    limits: GantryLimits = GantryLimits(),
    camera: CameraIntrinsics = CameraIntrinsics(),
    object_points: Optional[np.ndarray] = None,
) -> List[RigidTransform]:
    """
    n uniform draws from `box`, rejection-filtered for limits and visibility.

    Each pose gets box.max_attempts tries before PoseSamplingError.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(int(seed))
    t_lo, t_hi = np.asarray(box.t_min, dtype=float), np.asarray(box.t_max, dtype=float)
    r_lo, r_hi = np.asarray(box.r_min_deg, dtype=float), np.asarray(box.r_max_deg, dtype=float)

    poses: List[RigidTransform] = []
    for i in range(n):
        for _ in range(box.max_attempts):
            t = rng.uniform(t_lo, t_hi)
            r = rng.uniform(r_lo, r_hi)
            pose = RigidTransform.from_pose_vector(t, r)
            if pose_is_admissible(pose, limits, camera, object_points):
                poses.append(pose)
                break
        else:
            raise PoseSamplingError(
                f"no admissible pose for task {i} after {box.max_attempts} draws; widen the workspace box"
            )
    return poses
