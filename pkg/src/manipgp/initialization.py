"""Goal configurations by numerical IK and selection of the straight-line initialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gp
from .gp import GPParams, GPTrajectory
from .kinematics import ChainModel, chain_state, manipulability, point_jacobian

DEDUP_TOL = 1e-3  # rad, joint-space distance below which two IK solutions are the same


@dataclass
class IKOptions:
    num_solutions: int = 20
    max_iters: int = 200
    pos_tol: float = 1e-4
    damping: float = 0.1
    seed: int = 0
    max_restarts: int = 400
    batch: int = 32

    def __post_init__(self):
        if self.num_solutions < 1:
            raise ValueError("num_solutions must be >= 1")
        if not self.pos_tol > 0:
            raise ValueError("pos_tol must be positive")


@dataclass
class IKResult:
    q: np.ndarray
    success: bool
    iterations: int
    error: float


def _ik_batch(model: ChainModel, x_goal: np.ndarray, Q0: np.ndarray, opts: IKOptions):
    """Damped least-squares position IK run on a batch of seeds in lockstep."""
    Q = model.clamp(np.array(Q0, dtype=float))
    B = len(Q)
    done = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    lam2 = opts.damping**2
    err = np.full(B, np.inf)
    for it in range(opts.max_iters + 1):
        st = chain_state(model, Q)
        e = x_goal - st.ee_position
        err = np.linalg.norm(e, axis=1)
        newly = (err < opts.pos_tol) & ~done
        iters[newly] = it
        done |= newly
        if done.all() or it == opts.max_iters:
            break
        J = point_jacobian(st, st.ee_position, model.n)
        JJt = J @ J.transpose(0, 2, 1) + lam2 * np.eye(3)
        step = np.einsum("bin,bi->bn", J, np.linalg.solve(JJt, e[..., None])[..., 0])
        Q = np.where(done[:, None], Q, model.clamp(Q + step))
    iters[~done] = opts.max_iters
    return Q, done, iters, err


def ik_solve(model: ChainModel, x_goal, seed_config, opts: IKOptions | None = None) -> IKResult:
    """Position-only IK from one seed; failure is reported, not raised."""
    opts = opts or IKOptions()
    Q, ok, iters, err = _ik_batch(model, np.asarray(x_goal, dtype=float), np.atleast_2d(seed_config), opts)
    return IKResult(Q[0], bool(ok[0]), int(iters[0]), float(err[0]))


def ik_candidates(model: ChainModel, x_goal, opts: IKOptions) -> np.ndarray:
    """Up to ``num_solutions`` distinct IK solutions from uniform random restarts.

    Restarts are drawn in fixed-size batches from ``opts.seed``, so the result
    for a smaller ``num_solutions`` is a prefix of the result for a larger one.
    """
    x_goal = np.asarray(x_goal, dtype=float)
    rng = np.random.default_rng(opts.seed)
    found: list[np.ndarray] = []
    drawn = 0
    while len(found) < opts.num_solutions and drawn < opts.max_restarts:
        seeds = rng.uniform(model.lower, model.upper, size=(opts.batch, model.n))
        drawn += opts.batch
        Q, ok, _, _ = _ik_batch(model, x_goal, seeds, opts)
        for q in Q[ok]:
            if all(np.linalg.norm(q - f) >= DEDUP_TOL for f in found):
                found.append(q)
                if len(found) == opts.num_solutions:
                    break
    return np.array(found).reshape(-1, model.n)


@dataclass
class InitResult:
    trajectory: GPTrajectory
    selected: int
    candidates: np.ndarray
    min_m: np.ndarray
    mean_m: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def score_straight_lines(model: ChainModel, start, goals: np.ndarray, params: GPParams, per_interval: int = 9):
    """Min and mean manipulability along each start-to-goal straight-line prior."""
    t = gp.dense_times(params, per_interval)
    mins, means = [], []
    for g in goals:
        traj = gp.make_constant_velocity_prior(start, g, params)
        m = manipulability(model, gp.sample(traj, t)[:, : model.n]).m
        mins.append(m.min())
        means.append(m.mean())
    return np.array(mins), np.array(means)


def select_candidate(min_m: np.ndarray, mean_m: np.ndarray) -> int:
    """Greatest minimum manipulability; ties go to the larger mean, then the lower index."""
    order = sorted(range(len(min_m)), key=lambda i: (-min_m[i], -mean_m[i], i))
    return order[0]


def best_initialization(model: ChainModel, start, x_goal, params: GPParams, opts: IKOptions | None = None,
                        per_interval: int = 9, candidates: np.ndarray | None = None) -> InitResult:
    opts = opts or IKOptions()
    start = np.asarray(start, dtype=float)
    if candidates is None:
        candidates = ik_candidates(model, x_goal, opts)
    if len(candidates) == 0:
        raise RuntimeError("no IK solution reaches the goal position; scenario is unreachable")
    min_m, mean_m = score_straight_lines(model, start, candidates, params, per_interval)
    k = select_candidate(min_m, mean_m)
    traj = gp.make_constant_velocity_prior(start, candidates[k], params)
    return InitResult(traj, k, candidates, min_m, mean_m, {"num_candidates": int(len(candidates))})
