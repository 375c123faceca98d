# tests/test_poses.py
import numpy as np
import pytest

from harness.poses import PoseSamplingError, pose_is_admissible, sample_initial_poses
from harness.scenario import ScenarioConfig, WorkspaceBox, parse_pose
from servo.geometry import CameraIntrinsics, RigidTransform
from sim.world import GantryLimits
from utils.config import ConfigError


def test_sampled_poses_are_admissible():
    poses = sample_initial_poses(5, seed=3)
    assert len(poses) == 5
    for pose in poses:
        assert pose_is_admissible(pose, GantryLimits(), CameraIntrinsics())


def test_sampling_is_seeded():
    a = sample_initial_poses(3, seed=9)
    b = sample_initial_poses(3, seed=9)
    c = sample_initial_poses(3, seed=10)
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.translation, q.translation)
    assert not np.array_equal(a[0].translation, c[0].translation)


def test_pose_outside_limits_is_rejected():
    pose = RigidTransform.from_pose_vector([0.0, 0.0, -1.48], [0.0, 0.0, 0.0])
    assert not pose_is_admissible(pose, GantryLimits(), CameraIntrinsics())


def test_impossible_box_raises():
    box = WorkspaceBox(t_min=(0.0, 0.0, 0.5), t_max=(0.1, 0.1, 0.6), max_attempts=10)
    with pytest.raises(PoseSamplingError) as exc:
        sample_initial_poses(1, seed=0, box=box)
    assert isinstance(exc.value, ConfigError)
    assert exc.value.key == "workspace"


def test_needs_at_least_one_pose():
    with pytest.raises(ValueError):
        sample_initial_poses(0, seed=0)


def test_reference_task_pose_is_admissible():
    cfg = ScenarioConfig.from_dict({})
    named = cfg.raw["poses"]
    pose = parse_pose("task113", "initial", named)
    assert pose_is_admissible(pose, cfg.limits, cfg.camera, cfg.object_points)
    assert pose_is_admissible(pose, GantryLimits(), CameraIntrinsics())
    t, r = pose.to_pose_vector()
    box = cfg.workspace
    assert np.all(np.asarray(box.t_min) <= t) and np.all(t <= np.asarray(box.t_max))
    assert np.all(np.asarray(box.r_min_deg) <= r) and np.all(r <= np.asarray(box.r_max_deg))
