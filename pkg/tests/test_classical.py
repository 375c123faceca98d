# tests/test_classical.py
import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from harness.run_task import desired_observation
from harness.scenario import ScenarioConfig
from servo.classical import ClassicalController, ClassicalGain, c_3dvs, c_ibvs, c_pbvs, pseudo_inverse
from servo.geometry import CameraIntrinsics
from servo.interaction import stack_3d
from servo.vscost import VsObservation, VsScheme


@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([(8, 6), (12, 6), (6, 6), (3, 6)]), st.booleans())
def test_pseudo_inverse_penrose_conditions(seed, shape, deficient):
    rng = np.random.default_rng(seed)
    m, n = shape
    M = rng.standard_normal(shape)
    if deficient:
        r = min(m, n) - 1
        M = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    Mp = pseudo_inverse(M)
    assert Mp.shape == (n, m)
    np.testing.assert_allclose(M @ Mp @ M, M, atol=1e-9)
    np.testing.assert_allclose(Mp @ M @ Mp, Mp, atol=1e-9 * max(1.0, np.abs(Mp).max()))
    np.testing.assert_allclose((M @ Mp).T, M @ Mp, atol=1e-9)
    np.testing.assert_allclose((Mp @ M).T, Mp @ M, atol=1e-9)


def test_pseudo_inverse_matches_numpy():
    M = np.random.default_rng(0).standard_normal((8, 6))
    np.testing.assert_allclose(pseudo_inverse(M), np.linalg.pinv(M), atol=1e-12)


def test_pseudo_inverse_of_zero():
    np.testing.assert_array_equal(pseudo_inverse(np.zeros((8, 6))), np.zeros((6, 8)))


def test_gain_must_be_positive():
    with pytest.raises(ValueError):
        ClassicalGain(lambda_s=0.0)


def test_c_ibvs_zero_error_gives_zero_twist():
    s = np.arange(8.0)
    L = np.random.default_rng(1).standard_normal((8, 6))
    np.testing.assert_array_equal(c_ibvs(s, s, L, 0.5).as_vector(), np.zeros(6))


def test_c_ibvs_square_identity():
    V = c_ibvs(np.ones(6), np.zeros(6), np.eye(6), 0.5)
    np.testing.assert_allclose(V.as_vector(), -0.5 * np.ones(6))


def test_c_3dvs_drives_points_toward_goal():
    P = np.array([[0.1, 0.0, 1.0], [0.0, 0.1, 1.0], [-0.1, 0.0, 1.0], [0.0, -0.1, 1.0]])
    P_star = P + np.array([0.0, 0.0, -0.05])
    L = stack_3d(P)
    V = c_3dvs(P, P_star, L, 0.5)
    P_dot = (L @ V.as_vector()).reshape(-1, 3)
    # error must shrink to first order
    assert np.sum((P - P_star) * P_dot) < 0


def test_c_pbvs_pure_translation():
    V = c_pbvs([0.1, -0.2, 0.05], np.zeros(3), 0.5)
    np.testing.assert_allclose(V.v, [-0.05, 0.1, -0.025])
    np.testing.assert_array_equal(V.w, np.zeros(3))


def test_c_pbvs_rotation_is_decoupled():
    tu = np.array([0.2, -0.1, 0.4])
    V = c_pbvs(np.zeros(3), tu, 0.5)
    np.testing.assert_allclose(V.w, -0.5 * tu)
    np.testing.assert_allclose(V.v, np.zeros(3), atol=1e-15)


def test_c_pbvs_rejects_half_turn():
    with pytest.raises(ValueError):
        c_pbvs(np.zeros(3), [0.0, 0.0, np.pi], 0.5)


@pytest.mark.parametrize("scheme", [VsScheme.ibvs(0), VsScheme.ibvs(2), VsScheme.three_d(), VsScheme.pbvs()])
def test_controller_at_goal_is_still(scheme):
    cfg = ScenarioConfig.from_dict({"controller": "classical"})
    cam = CameraIntrinsics()
    desired = desired_observation(cfg, cam)
    ctrl = ClassicalController(scheme, cam, desired, ClassicalGain(0.5))
    obs = VsObservation(desired.pixels, desired.depths, desired.points, np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(ctrl.compute(obs).as_vector(), np.zeros(6), atol=1e-12)
    ctrl.close()
