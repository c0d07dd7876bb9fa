"""MAP estimation over the support states.

The negative log posterior is a sum of whitened squared residuals. Every
factor touches one support state or two consecutive ones, so the Gauss-Newton
information matrix is block tridiagonal; it is stored as diagonal blocks
``D[k] = H[k, k]`` and sub-diagonal blocks ``L[k] = H[k+1, k]`` and factored
with a banded Cholesky solve.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import gp
from .factors import (
    CollisionFactorParams,
    CollisionFactors,
    FactorGroup,
    GoalPositionFactor,
    GPPriorFactors,
    ManipFactorParams,
    ManipulabilityFactors,
    StatePriorFactor,
    StatePriorParams,
)
from .gp import GPTrajectory
from .kinematics import ChainModel
from .scenario import ConfigError, ScenarioConfig, check_against_model

log = logging.getLogger(__name__)

DIAG_FLOOR = 1e-12  # keeps Marquardt scaling positive for variables with no information

@dataclass
class FactorGraph:
    num_states: int
    state_dim: int
    factors: list[FactorGroup]
    fixed: frozenset = frozenset()
    model: ChainModel | None = None  # used to clamp joint limits

    def __post_init__(self):
        touched = np.zeros(self.num_states, dtype=bool)
        for f in self.factors:
            keys = np.asarray(f.keys)
            if keys.shape[1] == 2 and np.any(keys[:, 1] != keys[:, 0] + 1):
                raise ValueError(f"{f.name} factors must connect consecutive states")
            if keys.shape[1] > 2:
                raise ValueError("factors may touch at most two support states")
            touched[keys.ravel()] = True
        if not touched.all():
            raise ValueError(f"support states {np.flatnonzero(~touched).tolist()} have no factor")

    def count(self, name: str, interpolated: bool | None = None) -> int:
        total = 0
        for f in self.factors:
            if f.name != name:
                continue
            if interpolated is not None and getattr(f, "interpolated", False) != interpolated:
                continue
            total += len(f)
        return total

    def cost(self, X: np.ndarray) -> float:
        return sum(f.cost(X) for f in self.factors)

    def costs_by_group(self, X: np.ndarray) -> dict[str, float]:
        out: dict[str, float] = {}
        for f in self.factors:
            key = f.name + ("_interp" if getattr(f, "interpolated", False) else "")
            out[key] = out.get(key, 0.0) + f.cost(X)
        return out

    def linearize(self, X: np.ndarray):
        """Cost, block-tridiagonal ``J^T J`` as ``(D, L)``, and gradient ``J^T r``."""
        K, b = self.num_states, self.state_dim
        D = np.zeros((K, b, b))
        L = np.zeros((max(K - 1, 0), b, b))
        g = np.zeros((K, b))
        cost = 0.0
        for f in self.factors:
            r, Js = f.evaluate(X)
            cost += 0.5 * float(np.sum(r * r))
            keys = np.asarray(f.keys)
            for col, J in enumerate(Js):
                np.add.at(D, keys[:, col], np.einsum("mdi,mdj->mij", J, J))
                np.add.at(g, keys[:, col], np.einsum("mdi,md->mi", J, r))
            if len(Js) == 2:
                np.add.at(L, keys[:, 0], np.einsum("mdi,mdj->mij", Js[1], Js[0]))
        return cost, D, L, g


def total_cost(graph: FactorGraph, traj: GPTrajectory | np.ndarray) -> float:
    X = traj.states if isinstance(traj, GPTrajectory) else np.asarray(traj)
    return graph.cost(X)


def dense_information(D: np.ndarray, L: np.ndarray) -> np.ndarray:
    K, b, _ = D.shape
    H = np.zeros((K * b, K * b))
    for k in range(K):
        H[k * b:(k + 1) * b, k * b:(k + 1) * b] = D[k]
    for k in range(K - 1):
        H[(k + 1) * b:(k + 2) * b, k * b:(k + 1) * b] = L[k]
        H[k * b:(k + 1) * b, (k + 1) * b:(k + 2) * b] = L[k].T
    return H


def information_matrix(graph: FactorGraph, X: np.ndarray) -> np.ndarray:
    """Dense ``J^T J`` assembled from the full stacked Jacobian (no band assumption)."""
    K, b = graph.num_states, graph.state_dim
    rows = []
    for f in graph.factors:
        _, Js = f.evaluate(X)
        keys = np.asarray(f.keys)
        m, d = Js[0].shape[:2]
        block = np.zeros((m, d, K * b))
        for col, J in enumerate(Js):
            for t in range(m):
                k = keys[t, col]
                block[t, :, k * b:(k + 1) * b] += J[t]
        rows.append(block.reshape(m * d, K * b))
    A = np.vstack(rows)
    return A.T @ A


def to_banded(D: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Upper banded storage (``scipy.linalg.solveh_banded`` layout)."""
    K, b, _ = D.shape
    u = 2 * b - 1
    ab = np.zeros((u + 1, K * b))
    a, c = np.triu_indices(b)
    k = np.arange(K)[:, None]
    ab[np.broadcast_to(u + a - c, (K, len(a))), k * b + c] = D[:, a, c]
    if K > 1:
        a2, c2 = (v.ravel() for v in np.meshgrid(np.arange(b), np.arange(b), indexing="ij"))
        k = np.arange(K - 1)[:, None]
        ab[np.broadcast_to(b - 1 + a2 - c2, (K - 1, len(a2))), (k + 1) * b + c2] = L[:, c2, a2]
    return ab


def solve_normal_equations(D, L, g, fixed=(), damping: float = 0.0, mode: str = "marquardt") -> np.ndarray:
    """Solve ``(H + damping * M) dx = -g`` with fixed states pinned to ``dx = 0``.

    ``M`` is the identity (``mode="identity"``) or ``diag(H)`` (``"marquardt"``).
    """
    D = D.copy()
    L = L.copy()
    g = g.copy()
    b = D.shape[1]
    idx = np.arange(b)
    if mode == "identity":
        D[:, idx, idx] += damping
    elif mode == "marquardt":
        D[:, idx, idx] += damping * np.maximum(D[:, idx, idx], DIAG_FLOOR)
    else:
        raise ValueError(f"unknown damping mode {mode!r}")
    for k in fixed:
        D[k] = np.eye(b)
        g[k] = 0.0
        if k > 0:
            L[k - 1] = 0.0
        if k < len(L):
            L[k] = 0.0
    dx = linalg.solveh_banded(to_banded(D, L), -g.ravel(), check_finite=False)
    return dx.reshape(g.shape)


@dataclass
class SolverOptions:
    max_iters: int = 100
    tol_rel: float = 1e-5
    tol_abs: float = 1e-12
    lm_damping_init: float = 1e-4
    lm_damping_max: float = 1e12
    lm_factor: float = 10.0
    damping_mode: str = "marquardt"


@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    converged: bool
    wall_time: float
    status: str
    cost_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "converged": self.converged,
            "status": self.status,
            "wall_time": self.wall_time,
            "cost_trace": self.cost_trace,
        }


def solve(graph: FactorGraph, init: GPTrajectory, opts: SolverOptions | None = None) -> tuple[GPTrajectory, SolveReport]:
    """Levenberg-Marquardt on the block-tridiagonal normal equations.

    Candidate steps are clamped to joint limits before they are scored, so an
    accepted step never raises the total cost.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    X = init.states.copy()
    n = graph.model.n if graph.model is not None else None
    cost = graph.cost(X)
    trace = [cost]
    lam = opts.lm_damping_init
    status = "max_iters"
    accepted = 0
    if not np.isfinite(cost):
        status = "diverged"
    elif cost < opts.tol_abs:
        status = "abs_tol"
    else:
        for _ in range(opts.max_iters):
            cost, D, L, g = graph.linearize(X)
            if not (np.all(np.isfinite(D)) and np.all(np.isfinite(g))):
                status = "diverged"
                break
            improved = False
            while lam <= opts.lm_damping_max:
                try:
                    dx = solve_normal_equations(D, L, g, graph.fixed, lam, opts.damping_mode)
                except linalg.LinAlgError:
                    lam *= opts.lm_factor
                    continue
                cand = X + dx
                if n is not None:
                    cand[:, :n] = graph.model.clamp(cand[:, :n])
                new_cost = graph.cost(cand)
                if np.isfinite(new_cost) and new_cost < cost:
                    improved = True
                    break
                lam *= opts.lm_factor
            if not improved:
                status = "damping_limit"
                break
            accepted += 1
            rel = (cost - new_cost) / max(cost, 1e-300)
            X, cost = cand, new_cost
            trace.append(cost)
            lam = max(lam / opts.lm_factor, 1e-12)
            log.debug("iter %d cost %.6e lambda %.1e", accepted, cost, lam)
            if cost < opts.tol_abs:
                status = "abs_tol"
                break
            if rel < opts.tol_rel:
                status = "rel_tol"
                break
    report = SolveReport(
        iterations=accepted,
        initial_cost=trace[0],
        final_cost=trace[-1],
        converged=status in ("abs_tol", "rel_tol", "damping_limit"),
        wall_time=time.perf_counter() - t0,
        status=status,
        cost_trace=trace,
    )
    return init.with_states(X), report


def solver_options(cfg: ScenarioConfig) -> SolverOptions:
    s = cfg.solver
    return SolverOptions(s.max_iters, s.tol_rel, s.tol_abs, s.lm_damping_init, s.lm_damping_max,
                         s.lm_factor, s.damping_mode)


def assemble(scenario: ScenarioConfig, model: ChainModel, init: GPTrajectory, sdf=None,
             interpolated: bool | None = None) -> FactorGraph:
    """Factor graph for a scenario around an initial trajectory.

    The initial trajectory supplies the means of the start, goal and any
    intermediate state priors. ``interpolated`` overrides the scenario's
    choice of adding factors at interpolated times.
    """
    check_against_model(scenario, model)
    params = init.params
    if params.n != model.n:
        raise ConfigError("trajectory and robot dimensions differ")
    N = params.num_support - 1
    fc = scenario.factors
    k = scenario.solver.interp_per_interval
    use_interp = fc.interpolated if interpolated is None else interpolated
    use_interp = use_interp and k > 0

    factors: list[FactorGroup] = [GPPriorFactors(params)]
    for idx in (0, N):
        factors.append(StatePriorFactor(idx, StatePriorParams(init.support(idx), fc.sigma_theta_anchor)))
    for fs in fc.fixed_states:
        factors.append(StatePriorFactor(fs.index, StatePriorParams(init.support(fs.index), fs.sigma)))

    support = np.arange(N + 1)
    intervals = np.repeat(np.arange(N), k)
    offsets = np.tile(gp.interior_offsets(params, k), N) if k > 0 else np.zeros(0)
    if fc.manipulability:
        if model.m_max is None:
            raise ConfigError("robot m_max must be known before assembling manipulability factors")
        mp = ManipFactorParams.default(fc.sigma_s, model.m_max, fc.c)
        factors.append(ManipulabilityFactors(model, mp, params, support))
        if use_interp:
            factors.append(ManipulabilityFactors(model, mp, params, intervals, offsets))
    if scenario.obstacles:
        if sdf is None:
            raise ConfigError("scenario has obstacles but no distance field was supplied")
        cp = CollisionFactorParams(fc.sigma_obs, fc.eps)
        factors.append(CollisionFactors(model, sdf, cp, params, support))
        if use_interp:
            factors.append(CollisionFactors(model, sdf, cp, params, intervals, offsets))
    if scenario.goal_type == "position":
        factors.append(GoalPositionFactor(model, N, scenario.goal_value, fc.sigma_goal))

    fixed = frozenset({0, N}) if fc.fix_endpoints else frozenset()
    return FactorGraph(N + 1, 2 * model.n, factors, fixed, model)
