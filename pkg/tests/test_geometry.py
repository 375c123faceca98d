# tests/test_geometry.py
import numpy as np
import pytest
from hypothesis import assume, given
import hypothesis.strategies as st

from servo.geometry import (
    CameraIntrinsics,
    DepthBehindCamera,
    PixelPoint,
    RigidTransform,
    Twist,
    axis_angle_to_rotation,
    integrate_twist,
    move_points,
    project,
    project_points,
    rotation_to_axis_angle,
    skew,
    transform_point,
    vee,
)

CAM = CameraIntrinsics()

coord = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
depth = st.floats(min_value=0.1, max_value=5.0, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)


def test_project_known_point():
    p = project([0.1, -0.05, 1.0], CAM)
    assert isinstance(p, PixelPoint)
    assert p == pytest.approx((404.0, 198.0))


@pytest.mark.parametrize("z", [0.0, -1.0])
def test_project_rejects_points_behind_camera(z):
    with pytest.raises(DepthBehindCamera):
        project([0.1, 0.1, z], CAM)


@given(coord, coord, depth, st.floats(min_value=0.1, max_value=10.0))
def test_project_is_scale_invariant(x, y, z, k):
    a = np.array(project([x, y, z], CAM))
    b = np.array(project([k * x, k * y, k * z], CAM))
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_project_points_matches_project():
    P = np.array([[0.1, -0.05, 1.0], [-0.2, 0.3, 2.0]])
    out = project_points(P, CAM)
    for row, p in zip(out, P):
        np.testing.assert_allclose(row, project(p, CAM))


def test_camera_rejects_bad_focal():
    with pytest.raises(ValueError):
        CameraIntrinsics(f_u=0.0)


def test_normalized_half_extent():
    assert CAM.normalized_half_extent == pytest.approx((320 / 840, 240 / 840))


@given(vec3, vec3)
def test_skew_is_cross_product(a, b):
    np.testing.assert_allclose(skew(a) @ np.array(b), np.cross(a, b), atol=1e-12)
    np.testing.assert_allclose(vee(skew(a)), a)


@given(vec3)
def test_axis_angle_roundtrip(w):
    w = np.array(w) * 3.0
    assume(np.linalg.norm(w) < np.pi - 1e-3)
    R = axis_angle_to_rotation(w)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)
    np.testing.assert_allclose(rotation_to_axis_angle(R), w, atol=1e-9)


@pytest.mark.parametrize("theta", [0.0, 1e-9, 1e-6, np.pi - 1e-4, np.pi - 1e-7])
def test_axis_angle_roundtrip_at_extremes(theta):
    u = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)
    out = rotation_to_axis_angle(axis_angle_to_rotation(theta * u))
    np.testing.assert_allclose(out, theta * u, atol=1e-9)


def test_axis_angle_batched_matches_single():
    W = np.array([[0.1, 0.2, 0.3], [0.0, 0.0, 0.0], [1.0, -2.0, 0.5]])
    batch = axis_angle_to_rotation(W)
    assert batch.shape == (3, 3, 3)
    for w, R in zip(W, batch):
        np.testing.assert_allclose(R, axis_angle_to_rotation(w), atol=1e-14)


def test_pose_vector_roundtrip():
    pose = RigidTransform.from_pose_vector([0.44, -0.23, -1.35], [10.95, -20.48, -50.15])
    t, r = pose.to_pose_vector()
    np.testing.assert_allclose(t, [0.44, -0.23, -1.35])
    np.testing.assert_allclose(r, [10.95, -20.48, -50.15], atol=1e-9)


def test_compose_with_inverse_is_identity():
    pose = RigidTransform.from_pose_vector([0.1, 0.2, -0.8], [10.0, -5.0, 40.0])
    ident = pose.compose(pose.inverse())
    np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(ident.translation, np.zeros(3), atol=1e-12)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, 2.0]), np.zeros(3))


def test_twist_vector_roundtrip():
    V = Twist.from_vector([1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(V.as_vector(), [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal((-V).as_vector(), [-1, -2, -3, -4, -5, -6])
    np.testing.assert_array_equal(Twist.zero().as_vector(), np.zeros(6))


def test_integrate_pure_translation():
    pose = RigidTransform.identity()
    out = integrate_twist(pose, Twist(np.array([0.0, 0.0, 0.1]), np.zeros(3)), 0.5)
    np.testing.assert_allclose(out.translation, [0.0, 0.0, 0.05], atol=1e-12)
    np.testing.assert_allclose(out.rotation, np.eye(3), atol=1e-12)


def test_integrate_pure_rotation():
    pose = RigidTransform.from_pose_vector([0.1, 0.0, -0.75], [0.0, 0.0, 0.0])
    out = integrate_twist(pose, Twist(np.zeros(3), np.array([0.0, 0.0, 0.5])), 0.2)
    np.testing.assert_allclose(out.translation, pose.translation, atol=1e-15)
    np.testing.assert_allclose(rotation_to_axis_angle(out.rotation), [0.0, 0.0, 0.1], atol=1e-12)


def test_integrate_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        integrate_twist(RigidTransform.identity(), Twist.zero(), 0.0)


@given(vec3, vec3, st.floats(min_value=1e-3, max_value=0.1))
def test_move_points_matches_world_motion(v, w, dt):
    pose = RigidTransform.from_pose_vector([0.05, -0.02, -0.9], [5.0, -8.0, 30.0])
    V = Twist(np.array(v), np.array(w))
    P_world = np.array([[-0.1, -0.1, 0.0], [0.1, 0.1, 0.0]])
    moved = move_points(transform_point(pose, P_world), V, dt)
    expected = transform_point(integrate_twist(pose, V, dt), P_world)
    np.testing.assert_allclose(moved, expected, atol=1e-12)


@given(vec3, vec3, st.floats(min_value=1e-3, max_value=0.5))
def test_opposite_twist_returns_to_start(v, w, dt):
    pose = RigidTransform.from_pose_vector([0.2, -0.1, -0.8], [10.0, -20.0, 60.0])
    V = Twist(np.array(v), np.array(w))
    back = integrate_twist(integrate_twist(pose, V, dt), -V, dt)
    np.testing.assert_allclose(back.translation, pose.translation, atol=1e-10)
    np.testing.assert_allclose(back.rotation, pose.rotation, atol=1e-10)
