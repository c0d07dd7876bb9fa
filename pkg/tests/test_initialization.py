import numpy as np
import pytest

from manipgp.gp import GPParams
from manipgp.initialization import (
    IKOptions,
    best_initialization,
    ik_candidates,
    ik_solve,
    score_straight_lines,
    select_candidate,
)
from manipgp.kinematics import ee_position

GOAL = np.array([0.6, 0.4, 0.5])


def test_ik_candidates_reach_goal_and_are_distinct(ur10):
    cands = ik_candidates(ur10, GOAL, IKOptions(num_solutions=8, seed=2))
    assert len(cands) == 8
    assert np.all(np.linalg.norm(ee_position(ur10, cands) - GOAL, axis=1) < 1e-4)
    assert np.all((cands >= ur10.lower) & (cands <= ur10.upper))
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(cands) for b in cands[i + 1:]]
    assert min(gaps) >= 1e-3


def test_smaller_request_is_a_prefix(ur10):
    big = ik_candidates(ur10, GOAL, IKOptions(num_solutions=10, seed=5))
    small = ik_candidates(ur10, GOAL, IKOptions(num_solutions=4, seed=5))
    assert np.array_equal(small, big[:4])


def test_unreachable_goal(ur10):
    far = np.array([5.0, 0.0, 0.0])
    opts = IKOptions(num_solutions=2, max_restarts=64, max_iters=50)
    assert len(ik_candidates(ur10, far, opts)) == 0
    res = ik_solve(ur10, far, np.zeros(6), opts)
    assert not res.success and res.error > 3.0
    params = GPParams.isotropic(6, 1e6, 10.0, 5)
    with pytest.raises(RuntimeError, match="unreachable"):
        best_initialization(ur10, np.zeros(6), far, params, opts)


def test_selection_prefers_largest_minimum_then_mean():
    assert select_candidate(np.array([0.1, 0.3, 0.3]), np.array([0.9, 0.4, 0.5])) == 2
    assert select_candidate(np.array([0.2, 0.2]), np.array([0.5, 0.5])) == 0


def test_best_initialization_is_straight_line_to_selected(ur10):
    params = GPParams.isotropic(6, 1e6, 10.0, 6)
    start = np.array([0.3, -1.0, 1.2, -1.5, 1.2, 0.2])
    res = best_initialization(ur10, start, GOAL, params, IKOptions(num_solutions=5, seed=1), per_interval=3)
    mins, means = score_straight_lines(ur10, start, res.candidates, params, 3)
    assert np.allclose(mins, res.min_m) and np.all(mins <= means)
    assert res.selected == int(np.argmax(mins))
    assert np.allclose(res.trajectory.theta[0], start)
    assert np.allclose(res.trajectory.theta[-1], res.candidates[res.selected])
