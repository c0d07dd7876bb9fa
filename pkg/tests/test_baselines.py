import math

import numpy as np
import pytest

from manipgp.baselines import (
    TrackerOptions,
    dls_damping,
    dls_tracker_step,
    nullspace_manip_tracker_step,
    nullspace_projector,
    run_tracker,
)
from manipgp.initialization import IKOptions, ik_candidates
from manipgp.kinematics import chain_state, manipulability, point_jacobian

GOAL = np.array([0.6, 0.4, 0.5])


def _pos_jac(model, q):
    st = chain_state(model, np.atleast_2d(q))
    return point_jacobian(st, st.ee_position, model.n)[0]


def test_damping_ramp():
    opts = TrackerOptions()
    assert dls_damping(0.2, opts) == 0.0
    assert dls_damping(0.0, opts) == pytest.approx(opts.damping_max)
    assert 0 < dls_damping(0.03, opts) < opts.damping_max


def test_dls_step_bounded_at_singularity(ur10):
    q = np.zeros(6)  # stretched-out arm
    w = dls_tracker_step(ur10, q, GOAL, TrackerOptions())
    assert np.all(np.isfinite(w))
    assert np.abs(w).max() <= math.pi / 3 + 1e-12


def test_clipping_keeps_direction(ur10):
    q = np.array([0.3, -1.0, 1.2, -1.5, 1.2, 0.2])
    opts = TrackerOptions(gain=100.0)
    w = dls_tracker_step(ur10, q, GOAL, opts)
    raw = dls_tracker_step(ur10, q, GOAL, TrackerOptions(gain=100.0, vel_limit=1e9))
    assert np.abs(w).max() == pytest.approx(opts.vel_limit)
    assert np.allclose(w / np.linalg.norm(w), raw / np.linalg.norm(raw))


def test_nullspace_projector_annihilates_task(ur10, rng):
    q = rng.uniform(ur10.lower, ur10.upper)
    J = _pos_jac(ur10, q)
    assert np.allclose(J @ nullspace_projector(J), 0.0, atol=1e-10)


def test_nullspace_step_tracks_task(ur10):
    q = np.array([0.3, -1.0, 1.2, -1.5, 1.2, 0.2])
    opts = TrackerOptions(gain=0.01, vel_limit=1e9)
    w = nullspace_manip_tracker_step(ur10, q, GOAL, opts)
    st = chain_state(ur10, q[None])
    assert np.allclose(_pos_jac(ur10, q) @ w, opts.gain * (GOAL - st.ee_position[0]), atol=1e-9)


@pytest.mark.parametrize("policy", ["dls", "nullspace"])
def test_tracker_reaches_goal_within_velocity_limit(ur10, policy):
    goal_q = ik_candidates(ur10, GOAL, IKOptions(num_solutions=1, seed=0))[0]
    q0 = goal_q + np.array([0.3, -0.2, 0.2, 0.1, -0.3, 0.2])
    tr = run_tracker(ur10, q0, GOAL, TrackerOptions(), policy)
    met = tr.metrics()
    assert tr.success and met["solved"]
    assert met["velocity"]["max"] <= math.pi / 3 + 1e-12
    assert met["manip"]["min"] <= met["manip"]["avg"] <= met["manip"]["max"]
    assert len(tr.q) == len(tr.omega) + 1
    assert np.allclose(met["manip"]["avg"], manipulability(ur10, tr.q).m.mean())


def test_tracker_timeout_and_options():
    with pytest.raises(ValueError):
        TrackerOptions(dt=0.0)
    with pytest.raises(ValueError):
        TrackerOptions(gain=-1.0)


def test_tracker_gives_up_on_unreachable_goal(ur10):
    tr = run_tracker(ur10, np.zeros(6), [5.0, 0, 0], TrackerOptions(timeout=0.5))
    assert not tr.success
    assert len(tr.omega) == 25
