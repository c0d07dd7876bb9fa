import numpy as np
import pytest

from conftest import central_diff
from manipgp import gp
from manipgp.factors import (
    CollisionFactorParams,
    CollisionFactors,
    GoalPositionFactor,
    GPPriorFactors,
    ManipFactorParams,
    ManipulabilityFactors,
    StatePriorFactor,
    StatePriorParams,
    collision_cost,
    collision_cost_jacobian,
    goal_position_residual,
    manip_cost,
    manip_cost_gradient,
)
from manipgp.gp import GPParams
from manipgp.kinematics import ee_position, manipulability
from manipgp.workspace import AnalyticSDF, Box, Sphere


def test_manip_cost_values(ur10, rng):
    mp = ManipFactorParams(1e-4, 0.05, ur10.m_max)
    q = rng.uniform(ur10.lower, ur10.upper)
    m = manipulability(ur10, q).m
    assert manip_cost(ur10, q, mp) == pytest.approx(np.log((ur10.m_max + 0.05) / (m + 0.05)), rel=1e-12)
    assert manip_cost(ur10, q, mp) > 0
    assert ManipFactorParams.default(1e-4, 2.0).c == pytest.approx(0.02)
    with pytest.raises(ValueError):
        ManipFactorParams(1e-4, 0.0, 1.0)


def test_manip_cost_precise_for_large_c(ur10, rng):
    big_c = 3e4
    mp = ManipFactorParams(1e-4, big_c, ur10.m_max)
    q = rng.uniform(ur10.lower, ur10.upper)
    m = manipulability(ur10, q).m
    # series of log(1 + u) for u = (m_max - m) / (m + c)
    u = (ur10.m_max - m) / (m + big_c)
    assert manip_cost(ur10, q, mp) == pytest.approx(u - u**2 / 2 + u**3 / 3, rel=1e-12)


def test_manip_cost_at_zero_and_ceiling(planar2):
    mp = ManipFactorParams(1e-4, 0.01, 1.0)
    assert manip_cost(planar2, [0.2, 0.0], mp) == pytest.approx(np.log(101.0))
    top = ManipFactorParams(1e-4, 0.01, 1.0 * abs(np.sin(1.0)))
    assert manip_cost(planar2, [0.2, 1.0], top) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("c", [None, 3e4])
def test_manip_cost_gradient_matches_differences(ur10, rng, c):
    mp = ManipFactorParams.default(1e-4, ur10.m_max, c)
    for _ in range(10):
        q = rng.uniform(ur10.lower, ur10.upper)
        fd = central_diff(lambda x: manip_cost(ur10, x, mp), q)
        g = manip_cost_gradient(ur10, q, mp)
        assert np.abs(g - fd).max() <= 1e-6 * np.abs(fd).max()


def _sdf_near(model, q, dist=0.25, radius=0.1):
    from manipgp.kinematics import forward_kinematics

    s = model.collision_spheres[3]
    T = forward_kinematics(model, q)[s.link]
    c = T[:3, :3] @ s.center + T[:3, 3]
    return AnalyticSDF([Sphere(c + np.array([dist, 0.0, 0.0]), radius)])


def test_collision_hinge_values(ur10):
    q = np.array([0.3, -1.0, 1.2, -1.5, 1.2, 0.2])
    sdf = _sdf_near(ur10, q)
    res = collision_cost(ur10, sdf, q, 0.3)
    d, _, _ = sdf.query(_centres(ur10, q))
    radii = np.array([s.radius for s in ur10.collision_spheres])
    assert np.allclose(res.costs, np.maximum(0.3 - d + radii, 0.0))
    assert (res.costs > 0).any() and (res.costs == 0).any()


def _centres(model, q):
    from manipgp.kinematics import forward_kinematics

    F = forward_kinematics(model, q)
    return np.array([F[s.link, :3, :3] @ s.center + F[s.link, :3, 3] for s in model.collision_spheres])


def test_collision_jacobian_matches_differences(ur10, rng):
    for _ in range(5):
        q = rng.uniform(ur10.lower, ur10.upper)
        sdf = _sdf_near(ur10, q)
        J = collision_cost_jacobian(ur10, sdf, q, 0.3)
        fd = central_diff(lambda x: collision_cost(ur10, sdf, x, 0.3).costs, q)
        assert np.allclose(J, fd, atol=1e-6)


def test_collision_cost_zero_far_away(ur10):
    sdf = AnalyticSDF([Box(np.array([5.0, 5.0, 5.0]), np.array([0.1, 0.1, 0.1]))])
    assert np.all(collision_cost(ur10, sdf, np.zeros(6), 0.3).costs == 0)
    assert np.all(collision_cost_jacobian(ur10, sdf, np.zeros(6), 0.3) == 0)
    with pytest.raises(ValueError):
        CollisionFactorParams(0.0, 0.3)


def test_goal_residual_and_jacobian(ur10, rng):
    q = rng.uniform(ur10.lower, ur10.upper)
    goal = np.array([0.5, 0.2, 0.3])
    r, J = goal_position_residual(ur10, q, goal)
    assert np.allclose(r, ee_position(ur10, q) - goal)
    assert np.allclose(J, central_diff(lambda x: goal_position_residual(ur10, x, goal)[0], q), atol=1e-7)


def _support_states(rng, model, params):
    theta = rng.uniform(model.lower, model.upper, size=(params.num_support, model.n))
    return np.hstack([theta, rng.normal(scale=0.1, size=theta.shape)])


def _group_fd(group, X):
    """Differences of a factor group's residuals with respect to every support state entry."""
    return central_diff(lambda x: group.evaluate(x.reshape(X.shape), jacobians=False)[0], X.ravel())


def _group_analytic(group, X):
    r, Js = group.evaluate(X)
    m, d = r.shape
    K, b = X.shape
    full = np.zeros((m, d, K * b))
    for col, J in enumerate(Js):
        for t in range(m):
            k = group.keys[t, col]
            full[t, :, k * b:(k + 1) * b] += J[t]
    return full


def test_interpolated_factor_jacobians_chain_through_gp(ur10, rng):
    params = GPParams.isotropic(6, 1e5, 4.0, 3)
    X = _support_states(rng, ur10, params)
    offsets = gp.interior_offsets(params, 3)
    idx = np.repeat([0, 1], 3)
    offs = np.tile(offsets, 2)
    mp = ManipFactorParams(1e-4, 0.01, ur10.m_max)
    sdf = _sdf_near(ur10, X[0, :6])
    for group in (ManipulabilityFactors(ur10, mp, params, idx, offs),
                  ManipulabilityFactors(ur10, mp, params, [0, 1, 2]),
                  CollisionFactors(ur10, sdf, CollisionFactorParams(1e-2, 0.3), params, idx, offs)):
        assert np.allclose(_group_analytic(group, X), _group_fd(group, X), atol=2e-5)


def test_interpolated_configurations_match_sampling(ur10, rng):
    params = GPParams.isotropic(6, 1e5, 4.0, 3)
    X = _support_states(rng, ur10, params)
    traj = gp.GPTrajectory(X, params, X.copy())
    f = ManipulabilityFactors(ur10, ManipFactorParams.default(1e-4, ur10.m_max), params, [0, 1], [0.5, 1.2])
    expect = gp.sample(traj, [0.5, params.dt + 1.2])[:, :6]
    assert np.allclose(f.configurations(X), expect)
    with pytest.raises(ValueError):
        ManipulabilityFactors(ur10, f.mparams, params, [0], [params.dt])


def test_gp_prior_group_matches_prior_cost(rng):
    params = GPParams.isotropic(3, 10.0, 3.0, 5)
    X = rng.normal(size=(5, 6))
    group = GPPriorFactors(params)
    assert group.cost(X) == pytest.approx(gp.prior_cost(gp.GPTrajectory(X, params, X)), rel=1e-10)
    assert np.allclose(_group_analytic(group, X), _group_fd(group, X), atol=1e-5)


def test_state_prior_and_goal_factor_whitening(ur10, rng):
    params = GPParams.isotropic(6, 1.0, 1.0, 2)
    X = _support_states(rng, ur10, params)
    mean = gp.SupportState(np.zeros(6), np.zeros(6), 0.0)
    f = StatePriorFactor(0, StatePriorParams(mean, 1e-3))
    assert f.cost(X) == pytest.approx(0.5 * np.sum(X[0] ** 2) / 1e-3)
    goal = ee_position(ur10, X[1, :6]) + 0.01
    g = GoalPositionFactor(ur10, 1, goal, 1e-6)
    assert g.cost(X) == pytest.approx(0.5 * 3 * 1e-4 / 1e-6)
    assert np.allclose(_group_analytic(g, X), _group_fd(g, X), atol=1e-2)
