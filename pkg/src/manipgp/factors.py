"""Likelihood and prior factors of the MAP objective.

Every factor returns a *whitened* residual ``r`` so that its negative
log-likelihood is ``0.5 * ||r||^2``. Factors come in groups that evaluate
many terms of one type in a single batched pass; a group exposes

* ``keys``: ``(m, arity)`` support-state indices each term touches,
* ``evaluate(X)``: residuals ``(m, d)`` and one Jacobian ``(m, d, 2n)`` per key
  column, all with respect to the stacked support states ``X`` (``(N+1, 2n)``).

Configuration-level factors (manipulability, collision) can sit on a support
state or on an interpolated time between two support states; the latter
chains the configuration gradient through ``Lambda`` and ``Psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .gp import GPParams, GPTrajectory, SupportState
from .kinematics import ChainModel, _as_batch, chain_state, manipulability, manipulability_trace, point_jacobian

C_DEFAULT_FRACTION = 0.01  # default cost-shaping constant as a fraction of m_max


@dataclass(frozen=True)
class ManipFactorParams:
    sigma_s: float
    c: float
    m_max: float

    def __post_init__(self):
        if not (self.sigma_s > 0 and self.c > 0 and self.m_max > 0):
            raise ValueError("sigma_s, c and m_max must be positive")

    @classmethod
    def default(cls, sigma_s: float, m_max: float, c: float | None = None) -> "ManipFactorParams":
        return cls(sigma_s, C_DEFAULT_FRACTION * m_max if c is None else c, m_max)


@dataclass(frozen=True)
class CollisionFactorParams:
    sigma_obs: float
    eps: float

    def __post_init__(self):
        if not self.sigma_obs > 0 or self.eps < 0:
            raise ValueError("sigma_obs must be positive and eps nonnegative")


@dataclass(frozen=True)
class StatePriorParams:
    mean: SupportState
    sigma_theta: float

    def __post_init__(self):
        if not self.sigma_theta > 0:
            raise ValueError("sigma_theta must be positive")


# -- configuration-level costs ----------------------------------------------


def _log_ratio(m: np.ndarray, params: ManipFactorParams) -> np.ndarray:
    # log1p keeps precision when c dwarfs m
    return np.log1p((params.m_max - m) / (m + params.c))


def manip_cost(model: ChainModel, q, params: ManipFactorParams):
    """Logarithmic singularity cost ``log((m_max + c) / (m + c))``."""
    Q, single = _as_batch(model, q)
    m = manipulability(model, Q).m
    h = _log_ratio(m, params)
    return float(h[0]) if single else h


def _manip_cost_and_grad(model: ChainModel, Q: np.ndarray, params: ManipFactorParams):
    m, trace = manipulability_trace(model, Q)
    h = _log_ratio(m, params)
    g = -(m / (m + params.c))[:, None] * trace
    return h, g, m


def manip_cost_gradient(model: ChainModel, q, params: ManipFactorParams) -> np.ndarray:
    """``-(m / (m + c)) * Tr(dJ/dtheta_j J^+)`` for each joint."""
    Q, single = _as_batch(model, q)
    g = _manip_cost_and_grad(model, Q, params)[1]
    return g[0] if single else g


@dataclass
class CollisionCost:
    costs: np.ndarray  # (..., S) hinge cost per collision sphere
    out_of_bounds: np.ndarray  # (..., S) sphere centre fell outside the field


def _sphere_terms(model: ChainModel, sdf, Q: np.ndarray, eps: float, with_jac: bool = True):
    st = chain_state(model, Q)
    B = Q.shape[0]
    S = len(model.collision_spheres)
    cost = np.zeros((B, S))
    oob = np.zeros((B, S), dtype=bool)
    jac = np.zeros((B, S, model.n)) if with_jac else None
    for k, sph in enumerate(model.collision_spheres):
        T = st.frames[:, sph.link]
        centre = T[:, :3, :3] @ sph.center + T[:, :3, 3]
        d, grad, out = sdf.query(centre)
        c = eps - d + sph.radius
        active = (c > 0) & ~out
        cost[:, k] = np.where(active, c, 0.0)
        oob[:, k] = out
        if with_jac:
            Jp = point_jacobian(st, centre, sph.link)
            jac[:, k] = np.where(active[:, None], -np.einsum("bi,bin->bn", grad, Jp), 0.0)
    return cost, oob, jac


def collision_cost(model: ChainModel, sdf, q, eps: float) -> CollisionCost:
    """Hinge cost ``max(eps - d(x) + r, 0)`` for every collision sphere."""
    Q, single = _as_batch(model, q)
    cost, oob, _ = _sphere_terms(model, sdf, Q, eps, with_jac=False)
    if single:
        return CollisionCost(cost[0], oob[0])
    return CollisionCost(cost, oob)


def collision_cost_jacobian(model: ChainModel, sdf, q, eps: float) -> np.ndarray:
    """Per-sphere gradient ``(S, n)``; zero for inactive spheres (subgradient at the knee)."""
    Q, single = _as_batch(model, q)
    jac = _sphere_terms(model, sdf, Q, eps)[2]
    return jac[0] if single else jac


def goal_position_residual(model: ChainModel, q, x_goal) -> tuple[np.ndarray, np.ndarray]:
    """End-effector position error and its ``3 x n`` Jacobian."""
    Q, single = _as_batch(model, q)
    st = chain_state(model, Q)
    r = st.ee_position - np.asarray(x_goal, dtype=float)
    J = point_jacobian(st, st.ee_position, model.n)
    return (r[0], J[0]) if single else (r, J)


def state_prior_residual(state: SupportState | np.ndarray, params: StatePriorParams) -> tuple[np.ndarray, np.ndarray]:
    """Unwhitened ``x - mean`` and its isotropic covariance."""
    x = state.x if isinstance(state, SupportState) else np.asarray(state, dtype=float)
    r = x - params.mean.x
    return r, params.sigma_theta * np.eye(len(r))


# -- factor groups -----------------------------------------------------------


class FactorGroup:
    name = "factor"
    keys: np.ndarray

    def __len__(self) -> int:
        return len(self.keys)

    def evaluate(self, X: np.ndarray, jacobians: bool = True):
        raise NotImplementedError

    def cost(self, X: np.ndarray) -> float:
        r, _ = self.evaluate(X, jacobians=False)
        return 0.5 * float(np.sum(r * r))

    def term_costs(self, X: np.ndarray) -> np.ndarray:
        r, _ = self.evaluate(X, jacobians=False)
        return 0.5 * np.sum(r * r, axis=1)


class GPPriorFactors(FactorGroup):
    """All binary GP prior factors ``Phi x_i - x_{i+1}`` of a trajectory."""

    name = "gp_prior"

    def __init__(self, params: GPParams):
        self.params = params
        N = params.num_support - 1
        self.keys = np.column_stack([np.arange(N), np.arange(1, N + 1)])
        Phi, _ = gp.transition(params, params.dt)
        W = np.linalg.cholesky(gp.q_inverse(params, params.dt)).T  # W^T W = Q^-1
        self._Phi = Phi
        self._Ji = W @ Phi
        self._Jn = -W
        self._W = W

    def evaluate(self, X, jacobians=True):
        r = (X[:-1] @ self._Phi.T - X[1:]) @ self._W.T
        if not jacobians:
            return r, None
        m = len(self.keys)
        return r, [np.broadcast_to(self._Ji, (m,) + self._Ji.shape), np.broadcast_to(self._Jn, (m,) + self._Jn.shape)]


class StatePriorFactor(FactorGroup):
    name = "state_prior"

    def __init__(self, index: int, params: StatePriorParams):
        self.index = int(index)
        self.params = params
        self.keys = np.array([[self.index]])
        self._scale = 1.0 / np.sqrt(params.sigma_theta)

    def evaluate(self, X, jacobians=True):
        r = (X[self.index] - self.params.mean.x) * self._scale
        if not jacobians:
            return r[None], None
        return r[None], [self._scale * np.eye(len(r))[None]]


class ConfigFactors(FactorGroup):
    """Configuration-level factors placed on support states or interpolated times.

    Subclasses implement ``_config_terms(Q) -> (r (B, d), dr/dtheta (B, d, n))``
    with the residual already whitened.
    """

    def __init__(self, params: GPParams, indices, offsets=None):
        self.params = params
        self.indices = np.asarray(indices, dtype=int)
        self.interpolated = offsets is not None
        n = params.n
        if self.interpolated:
            self.offsets = np.asarray(offsets, dtype=float)
            if np.any(self.offsets <= 0) or np.any(self.offsets >= params.dt):
                raise ValueError("interpolated factors need t_i < tau < t_{i+1}")
            if np.any(self.indices >= params.num_support - 1):
                raise ValueError("interval index out of range")
            self.keys = np.column_stack([self.indices, self.indices + 1])
            self._lam, self._psi = gp.interp_coeffs(self.offsets, params.dt)
        else:
            self.offsets = None
            self.keys = self.indices[:, None]
        self._n = n

    def configurations(self, X: np.ndarray) -> np.ndarray:
        n = self._n
        if not self.interpolated:
            return X[self.indices, :n]
        xi = X[self.indices].reshape(-1, 2, n)
        xj = X[self.indices + 1].reshape(-1, 2, n)
        return (np.einsum("kb,kbn->kn", self._lam[:, 0], xi) + np.einsum("kb,kbn->kn", self._psi[:, 0], xj))

    def _config_terms(self, Q):
        raise NotImplementedError

    def evaluate(self, X, jacobians=True):
        Q = self.configurations(X)
        r, G = self._config_terms(Q, jacobians)
        if not jacobians:
            return r, None
        if not self.interpolated:
            return r, [np.concatenate([G, np.zeros_like(G)], axis=2)]
        # d theta(tau) / d x_i = [Lam00 I, Lam01 I], likewise Psi for x_{i+1}
        Ji = np.concatenate([self._lam[:, 0, 0, None, None] * G, self._lam[:, 0, 1, None, None] * G], axis=2)
        Jj = np.concatenate([self._psi[:, 0, 0, None, None] * G, self._psi[:, 0, 1, None, None] * G], axis=2)
        return r, [Ji, Jj]


class ManipulabilityFactors(ConfigFactors):
    name = "manipulability"

    def __init__(self, model: ChainModel, mparams: ManipFactorParams, params: GPParams, indices, offsets=None):
        super().__init__(params, indices, offsets)
        self.model = model
        self.mparams = mparams
        self._scale = 1.0 / np.sqrt(mparams.sigma_s)

    def _config_terms(self, Q, jacobians=True):
        h, g, _ = _manip_cost_and_grad(self.model, Q, self.mparams)
        return (h * self._scale)[:, None], (g * self._scale)[:, None, :]


class CollisionFactors(ConfigFactors):
    name = "collision"

    def __init__(self, model: ChainModel, sdf, cparams: CollisionFactorParams, params: GPParams, indices, offsets=None):
        super().__init__(params, indices, offsets)
        self.model = model
        self.sdf = sdf
        self.cparams = cparams
        self._scale = 1.0 / np.sqrt(cparams.sigma_obs)

    def _config_terms(self, Q, jacobians=True):
        cost, _, jac = _sphere_terms(self.model, self.sdf, Q, self.cparams.eps, with_jac=jacobians)
        return cost * self._scale, (jac * self._scale if jacobians else None)


class GoalPositionFactor(FactorGroup):
    name = "goal_position"

    def __init__(self, model: ChainModel, index: int, x_goal, sigma: float):
        if not sigma > 0:
            raise ValueError("goal sigma must be positive")
        self.model = model
        self.index = int(index)
        self.x_goal = np.asarray(x_goal, dtype=float)
        self.keys = np.array([[self.index]])
        self._scale = 1.0 / np.sqrt(sigma)

    def evaluate(self, X, jacobians=True):
        r, J = goal_position_residual(self.model, X[self.index, : self.model.n], self.x_goal)
        r = r * self._scale
        if not jacobians:
            return r[None], None
        return r[None], [np.hstack([J * self._scale, np.zeros_like(J)])[None]]


class LinearFactor(FactorGroup):
    """Affine residual ``(A x_i - b) / sqrt(sigma)`` on one support state."""

    name = "linear"

    def __init__(self, index: int, A, b, sigma: float = 1.0):
        self.index = int(index)
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.keys = np.array([[self.index]])
        self._scale = 1.0 / np.sqrt(sigma)

    def evaluate(self, X, jacobians=True):
        r = (self.A @ X[self.index] - self.b) * self._scale
        if not jacobians:
            return r[None], None
        return r[None], [(self.A * self._scale)[None]]


def manip_factor_residual(model: ChainModel, traj: GPTrajectory, index: int, params: ManipFactorParams, tau=None):
    """Whitened manipulability residual on support state ``index``, or at ``tau`` inside
    the interval ``[t_index, t_index+1]``.

    Returns ``(r, jacobians)`` where ``jacobians`` maps support index to a
    ``(1, 2n)`` block.
    """
    p = traj.params
    if tau is None:
        f = ManipulabilityFactors(model, params, p, [index])
    else:
        t0 = p.times[index]
        if not t0 < tau < t0 + p.dt:
            raise ValueError("tau must lie strictly inside the support interval")
        f = ManipulabilityFactors(model, params, p, [index], [tau - t0])
    r, Js = f.evaluate(traj.states)
    return r[0], {int(k): J[0] for k, J in zip(f.keys[0], Js)}
