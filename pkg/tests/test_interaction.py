# tests/test_interaction.py
import numpy as np
import pytest
from hypothesis import assume, given
import hypothesis.strategies as st

from servo.geometry import (
    CameraIntrinsics,
    RigidTransform,
    Twist,
    integrate_twist,
    project_points,
    skew,
    transform_point,
)
from servo.interaction import (
    DegenerateDepth,
    IbvsCase,
    back_project,
    ibvs_matrix_for_case,
    l2d_point,
    l3d_point,
    l_pbvs,
    l_theta_u,
    pbvs_velocity_matrix,
    stack_3d,
    stack_ibvs,
)
from sim.world import DEFAULT_OBJECT_POINTS

CAM = CameraIntrinsics()
coord = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)


def _scene():
    pose = RigidTransform.from_pose_vector([0.05, -0.03, -0.9], [8.0, -6.0, 25.0])
    P = transform_point(pose, DEFAULT_OBJECT_POINTS)
    return pose, P, project_points(P, CAM)


def test_l2d_at_principal_point():
    L = l2d_point([320.0, 240.0], 1.0, CAM)
    np.testing.assert_allclose(L[0], [-840.0, 0.0, 0.0, 0.0, -840.0, 0.0])
    np.testing.assert_allclose(L[1], [0.0, -840.0, 0.0, 840.0, 0.0, 0.0])


@pytest.mark.parametrize("z", [0.0, -0.5, 1e-9])
def test_l2d_rejects_degenerate_depth(z):
    with pytest.raises(DegenerateDepth):
        l2d_point([300.0, 200.0], z, CAM)


def test_stack_ibvs_shape_and_order():
    _, P, pix = _scene()
    L = stack_ibvs(pix, P[:, 2], CAM)
    assert L.shape == (8, 6)
    np.testing.assert_allclose(L[2:4], l2d_point(pix[1], P[1, 2], CAM))


def test_stack_ibvs_rejects_mismatch():
    with pytest.raises(ValueError):
        stack_ibvs(np.zeros((4, 2)) + 300.0, [1.0, 1.0, 1.0], CAM)


def test_ibvs_cases():
    _, P, pix = _scene()
    pix_star = pix + 5.0
    Z_star = P[:, 2] + 0.1
    cur, des = (pix, P[:, 2]), (pix_star, Z_star)
    L0 = stack_ibvs(pix, P[:, 2], CAM)
    L2 = stack_ibvs(pix_star, Z_star, CAM)
    np.testing.assert_allclose(ibvs_matrix_for_case(IbvsCase.CASE0, cur, des, CAM), L0)
    np.testing.assert_allclose(ibvs_matrix_for_case(1, cur, des, CAM), stack_ibvs(pix, Z_star, CAM))
    np.testing.assert_allclose(ibvs_matrix_for_case(2, cur, des, CAM), L2)
    np.testing.assert_allclose(ibvs_matrix_for_case("case3", cur, des, CAM), 0.5 * (L0 + L2))


@pytest.mark.parametrize("raw,case", [(0, IbvsCase.CASE0), ("#2", IbvsCase.CASE2), ("Case3", IbvsCase.CASE3)])
def test_ibvs_case_parse(raw, case):
    assert IbvsCase.parse(raw) is case


def test_ibvs_case_parse_rejects_unknown():
    with pytest.raises(ValueError):
        IbvsCase.parse(5)


def test_tracks_depth():
    assert [c.tracks_depth for c in IbvsCase] == [True, False, False, True]


def test_back_project_inverts_projection():
    _, P, pix = _scene()
    np.testing.assert_allclose(back_project(pix, P[:, 2], CAM), P, atol=1e-12)


@given(vec3, vec3, vec3)
def test_l3d_is_rigid_point_velocity(p, v, w):
    P = np.array(p) + np.array([0.0, 0.0, 2.0])
    out = l3d_point(P) @ np.concatenate([v, w])
    np.testing.assert_allclose(out, -np.array(v) - np.cross(w, P), atol=1e-12)


def test_stack_3d_shape():
    _, P, _ = _scene()
    assert stack_3d(P).shape == (12, 6)


def test_feature_velocities_match_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(20):
        pose = RigidTransform.from_pose_vector(
            [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-1.2, -0.6)],
            rng.uniform(-25, 25, 3),
        )
        V = Twist(rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.2, 0.2, 3))
        P = transform_point(pose, DEFAULT_OBJECT_POINTS)
        P_plus = transform_point(integrate_twist(pose, V, h), DEFAULT_OBJECT_POINTS)
        P_minus = transform_point(integrate_twist(pose, -V, h), DEFAULT_OBJECT_POINTS)

        fd_3d = (P_plus - P_minus).reshape(-1) / (2 * h)
        np.testing.assert_allclose(stack_3d(P) @ V.as_vector(), fd_3d, rtol=1e-4, atol=1e-8)

        fd_2d = (project_points(P_plus, CAM) - project_points(P_minus, CAM)).reshape(-1) / (2 * h)
        L = stack_ibvs(project_points(P, CAM), P[:, 2], CAM)
        np.testing.assert_allclose(L @ V.as_vector(), fd_2d, rtol=1e-4, atol=1e-5)


def test_l_theta_u_identity_at_zero():
    np.testing.assert_allclose(l_theta_u(np.zeros(3)), np.eye(3))


@given(vec3)
def test_l_theta_u_keeps_axis(w):
    w = np.array(w) * 3.0
    assume(np.linalg.norm(w) < np.pi - 1e-3)
    np.testing.assert_allclose(l_theta_u(w) @ w, w, atol=1e-12)


@pytest.mark.parametrize("theta", [0.9e-4, 1.1e-4, 1e-3])
def test_l_theta_u_matches_series_near_zero(theta):
    w = theta * np.array([0.0, 0.6, 0.8])
    W = skew(w)
    series = np.eye(3) - 0.5 * W + (1.0 / 12.0 + theta**2 / 720.0) * (W @ W)
    np.testing.assert_allclose(l_theta_u(w), series, atol=1e-12)


def test_l_pbvs_blocks():
    pose = RigidTransform.from_pose_vector([0, 0, 0], [10.0, 20.0, -30.0])
    tu = np.deg2rad([10.0, 20.0, -30.0])
    M = l_pbvs(pose.rotation, tu)
    np.testing.assert_allclose(M[:3, :3], pose.rotation)
    np.testing.assert_allclose(M[3:, 3:], l_theta_u(tu))
    np.testing.assert_array_equal(M[:3, 3:], 0.0)
    np.testing.assert_array_equal(M[3:, :3], 0.0)


def test_pbvs_velocity_matrix_decouples_rotation():
    pose = RigidTransform.from_pose_vector([0, 0, 0], [10.0, 20.0, -30.0])
    tu = np.deg2rad([10.0, 20.0, -30.0])
    M = pbvs_velocity_matrix(pose.rotation, tu)
    np.testing.assert_allclose(M[3:, 3:] @ tu, tu, atol=1e-12)
