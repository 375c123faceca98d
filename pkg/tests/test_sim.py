# tests/test_sim.py
import numpy as np
import pytest

from servo.geometry import CameraIntrinsics, RigidTransform, Twist, rotation_to_axis_angle
from sim.world import (
    CalibrationError,
    GantryLimits,
    NoiseSpec,
    World,
    apply_twist,
    observe,
    perturb_model,
    true_pose_error,
)

C1 = RigidTransform.from_pose_vector([0.0, 0.0, -0.75], [0.0, 0.0, 0.0])


def test_observe_desired_pose():
    obs = observe(World(C1))
    np.testing.assert_allclose(obs.pixels, [[208, 128], [432, 128], [432, 352], [208, 352]])
    np.testing.assert_allclose(obs.depths, 0.75)
    assert obs.visible.all()


def test_observe_behind_camera():
    world = World(RigidTransform.from_pose_vector([0.0, 0.0, 0.5], [0.0, 0.0, 0.0]))
    obs = observe(world)
    assert np.all(np.isnan(obs.pixels))
    assert not obs.visible.any()


def test_observe_out_of_image():
    obs = observe(World(RigidTransform.from_pose_vector([0.6, 0.0, -0.75], [0.0, 0.0, 0.0])))
    assert not obs.visible.all()


def test_noise_is_bounded_and_seeded():
    clean = observe(World(C1))
    noise = NoiseSpec(pixel=1.0, depth=0.005, seed=11)
    a = observe(World(C1), noise=noise)
    b = observe(World(C1), noise=noise)
    np.testing.assert_array_equal(a.pixels, b.pixels)
    assert np.max(np.abs(a.pixels - clean.pixels)) <= 1.0
    assert np.max(np.abs(a.depths - clean.depths)) <= 0.005
    assert np.any(a.pixels != clean.pixels)


def test_observe_with_other_camera():
    cam = CameraIntrinsics(f_u=1000.0, f_v=1000.0)
    obs = observe(World(C1), camera=cam)
    assert obs.pixels[0, 0] == pytest.approx(1000.0 * -0.1 / 0.75 + 320.0)


def test_limits_contains():
    limits = GantryLimits()
    assert limits.contains(C1)
    assert not limits.contains(RigidTransform.from_pose_vector([0.0, 0.0, -1.5], [0.0, 0.0, 0.0]))
    assert not limits.contains(RigidTransform.from_pose_vector([0.0, 0.0, -0.75], [0.0, 0.0, 160.0]))


def test_apply_twist_moves_camera():
    world, jl = apply_twist(World(C1), Twist(np.array([0.0, 0.0, 0.1]), np.zeros(3)), 0.02, GantryLimits())
    assert not jl
    np.testing.assert_allclose(world.camera_pose.translation, [0.0, 0.0, -0.748])


def test_apply_twist_stops_at_z_floor():
    start = World(RigidTransform.from_pose_vector([0.0, 0.0, -1.449], [0.0, 0.0, 0.0]))
    world, jl = apply_twist(start, Twist(np.array([0.0, 0.0, -1.0]), np.zeros(3)), 0.02, GantryLimits())
    assert jl
    assert world is start


def test_optical_axis_limit_step_count():
    world = World(C1)
    twist = Twist(np.zeros(3), np.array([0.0, 0.0, 0.5]))
    first_hit = None
    for k in range(400):
        world, jl = apply_twist(world, twist, 0.02, GantryLimits())
        if jl:
            first_hit = k
            break
    # 274 accepted steps of 0.01 rad, the 275th would pass 157 deg
    assert first_hit == 274
    assert np.linalg.norm(rotation_to_axis_angle(world.camera_pose.rotation)) == pytest.approx(2.74, abs=1e-9)


def test_perturb_model_combined_errors():
    cam_hat, factor = perturb_model(
        CameraIntrinsics(), CalibrationError(focal=0.3, rho_u=-0.2, rho_v=0.2, u_0=-0.15, v_0=0.15)
    )
    assert cam_hat.f_u == pytest.approx(1365.0)
    assert cam_hat.f_v == pytest.approx(910.0)
    assert cam_hat.u_0 == pytest.approx(272.0)
    assert cam_hat.v_0 == pytest.approx(276.0)
    assert factor == 1.0


def test_perturb_model_depth_offset():
    _, factor = perturb_model(CameraIntrinsics(), CalibrationError(depth_offset=-0.5))
    assert factor == 0.5


def test_calibration_error_rejects_minus_100_percent():
    with pytest.raises(ValueError):
        CalibrationError(focal=-1.0)


def test_true_pose_error():
    t, tu = true_pose_error(World(C1), C1)
    np.testing.assert_allclose(t, 0.0, atol=1e-12)
    np.testing.assert_allclose(tu, 0.0, atol=1e-12)
    shifted = World(RigidTransform.from_pose_vector([0.1, 0.0, -0.75], [0.0, 0.0, 0.0]))
    t, _ = true_pose_error(shifted, C1)
    np.testing.assert_allclose(t, [0.1, 0.0, 0.0], atol=1e-12)
