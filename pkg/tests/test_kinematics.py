import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bundled_robot, central_diff
from manipgp.kinematics import (
    ChainModel,
    ModelError,
    ee_position,
    estimate_m_max,
    forward_kinematics,
    jacobian,
    jacobian_partial,
    manipulability,
    manipulability_gradient,
    planar_chain,
    truncated_pinv,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def _rot_vee(dR, R):
    W = dR @ R.T
    return 0.5 * np.array([W[2, 1] - W[1, 2], W[0, 2] - W[2, 0], W[1, 0] - W[0, 1]])


def test_planar_2r_forward_kinematics_closed_form():
    model = planar_chain([0.7, 0.4])
    for t1, t2 in [(0.0, 0.0), (0.3, -1.1), (2.0, 2.5)]:
        x = ee_position(model, [t1, t2])
        expect = [0.7 * math.cos(t1) + 0.4 * math.cos(t1 + t2), 0.7 * math.sin(t1) + 0.4 * math.sin(t1 + t2), 0.0]
        assert np.allclose(x, expect, atol=1e-14)


def test_frames_shape_and_base_identity(ur10):
    F = forward_kinematics(ur10, np.zeros(6))
    assert F.shape == (7, 4, 4)
    B = forward_kinematics(ur10, np.zeros((5, 6)))
    assert B.shape == (5, 7, 4, 4)
    assert np.allclose(F[-1, :3, :3] @ F[-1, :3, :3].T, np.eye(3))


def test_spatial_jacobian_matches_pose_differences(ur10, rng):
    for _ in range(10):
        q = rng.uniform(ur10.lower, ur10.upper)
        J = jacobian(ur10, q)
        h = 1e-6
        R0 = forward_kinematics(ur10, q)[-1, :3, :3]
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            Tp, Tm = forward_kinematics(ur10, q + e)[-1], forward_kinematics(ur10, q - e)[-1]
            assert np.allclose(J[:3, j], (Tp[:3, 3] - Tm[:3, 3]) / (2 * h), atol=1e-7)
            assert np.allclose(J[3:, j], _rot_vee((Tp[:3, :3] - Tm[:3, :3]) / (2 * h), R0), atol=1e-7)


def test_jacobian_partial_matches_differences(ur10, rng):
    q = rng.uniform(ur10.lower, ur10.upper)
    for j in range(6):
        fd = central_diff(lambda x: jacobian(ur10, x), q)[..., j]
        assert np.allclose(jacobian_partial(ur10, q, j), fd, atol=1e-7)


def test_manipulability_equals_sqrt_det(ur10, planar3, rng):
    for model in (ur10, planar3):
        Q = rng.uniform(model.lower, model.upper, size=(50, model.n))
        J = jacobian(model, Q)
        ref = np.sqrt(np.abs(np.linalg.det(J @ J.transpose(0, 2, 1))))
        assert np.allclose(manipulability(model, Q).m, ref, rtol=1e-9, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(t1=angles, t2=angles, l1=st.floats(0.1, 2.0), l2=st.floats(0.1, 2.0))
def test_planar_2r_manipulability_formula(t1, t2, l1, l2):
    model = planar_chain([l1, l2])
    assert manipulability(model, [t1, t2]).m == pytest.approx(l1 * l2 * abs(math.sin(t2)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(q=st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3))
def test_manipulability_gradient_matches_differences(q):
    model = bundled_robot("planar_3r")
    q = np.array(q)
    if manipulability(model, q).smallest_sv < 1e-3:
        return
    g = manipulability_gradient(model, q)
    fd = central_diff(lambda x: manipulability(model, x).m, q)
    assert np.allclose(g, fd, atol=1e-7 * max(1.0, np.abs(fd).max()))


def test_gradient_is_finite_and_zero_at_singularity(planar2):
    g = manipulability_gradient(planar2, [0.4, 0.0])
    assert np.all(np.isfinite(g))
    assert manipulability(planar2, [0.4, 0.0]).m == pytest.approx(0.0, abs=1e-15)


def test_batched_matches_single(ur10, rng):
    Q = rng.uniform(ur10.lower, ur10.upper, size=(4, 6))
    gb = manipulability_gradient(ur10, Q)
    for k in range(4):
        assert np.allclose(gb[k], manipulability_gradient(ur10, Q[k]))


def test_truncated_pinv_agrees_with_numpy(rng):
    J = rng.normal(size=(3, 6))
    pinv, S = truncated_pinv(J[None])
    assert np.allclose(pinv[0], np.linalg.pinv(J))
    assert np.allclose(S[0], np.linalg.svd(J, compute_uv=False))


def test_truncated_pinv_drops_tiny_directions():
    J = np.diag([1.0, 1e-12, 0.0])
    pinv, _ = truncated_pinv(J[None])
    assert np.allclose(pinv[0], np.diag([1.0, 0.0, 0.0]))


def test_m_max_bounds_samples(ur10, rng):
    Q = rng.uniform(ur10.lower, ur10.upper, size=(2000, 6))
    assert manipulability(ur10, Q).m.max() < ur10.m_max
    assert estimate_m_max(ur10, 1000, seed=3) == estimate_m_max(ur10, 1000, seed=3)


def test_m_max_of_planar_2r():
    m_max = estimate_m_max(bundled_robot("planar_2r"), 100_000, seed=0)
    assert 1.05 * 0.98 <= m_max <= 1.05
    model = bundled_robot("planar_2r")
    q = np.random.default_rng(9).uniform(model.lower, model.upper, size=(1, 2))
    assert estimate_m_max(model, 1, seed=9) == pytest.approx(1.05 * manipulability(model, q[0]).m)
    with pytest.raises(ValueError):
        estimate_m_max(model, 0)


def test_dict_round_trip_preserves_kinematics(ur10, rng):
    again = ChainModel.from_dict(ur10.to_dict())
    q = rng.uniform(ur10.lower, ur10.upper)
    assert np.allclose(forward_kinematics(again, q), forward_kinematics(ur10, q), atol=1e-12)
    assert again.m_max == ur10.m_max


def test_dh_and_urdf_style_agree():
    dh = [(0.3, 0.0, math.pi / 2), (0.0, -0.6, 0.0), (0.0, -0.5, 0.0)]
    model = ChainModel.from_dh(dh, task_dim=3)
    q = np.array([0.2, -0.4, 0.9])
    T = np.eye(4)
    for (d, a, alpha), th in zip(dh, q):
        ct, st_, ca, sa = math.cos(th), math.sin(th), math.cos(alpha), math.sin(alpha)
        T = T @ np.array([[ct, -st_ * ca, st_ * sa, a * ct], [st_, ct * ca, -ct * sa, a * st_], [0, sa, ca, d], [0, 0, 0, 1]])
    assert np.allclose(forward_kinematics(model, q)[-1], T, atol=1e-12)


def _base_dict():
    return bundled_robot("planar_2r").to_dict()


def test_non_unit_axis_rejected():
    d = _base_dict()
    d["joints"][0]["axis"] = [0.0, 0.0, 2.0]
    with pytest.raises(ModelError, match="unit-norm"):
        ChainModel.from_dict(d)


def test_bad_limits_and_spheres_rejected():
    d = _base_dict()
    d["joints"][1]["limits"] = {"lower": 1.0, "upper": -1.0}
    with pytest.raises(ModelError):
        ChainModel.from_dict(d)
    d = _base_dict()
    d["collision_spheres"] = [{"link": 7, "center": [0, 0, 0], "radius": 0.1}]
    with pytest.raises(ModelError):
        ChainModel.from_dict(d)
    with pytest.raises(ModelError):
        ChainModel.from_dict({"joints": [{"origin": {}}]})


def test_too_few_joints_for_task():
    with pytest.raises(ModelError):
        planar_chain([1.0], task_dim=2)


def test_clamp_respects_limits(ur10):
    q = ur10.clamp(np.full(6, 100.0))
    assert np.all(q == ur10.upper)
