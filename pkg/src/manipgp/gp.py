"""Constant-velocity Gaussian-process trajectory representation.

The Markov state at time t is ``x = [theta, theta_dot]`` (length 2n). The
prior is the white-noise-on-acceleration LTV-SDE, so the transition and the
process covariance over a step ``dt`` have the closed forms::

    Phi(dt) = [[I, dt I], [0, I]]
    Q(dt)   = [[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]]

Any state between two support times is an affine function of its two
neighbouring support states (``Lambda``, ``Psi``), which is what keeps both
interpolation and the downstream linear systems cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class GPParams:
    Qc: np.ndarray
    total_time: float
    num_support: int

    def __post_init__(self):
        Qc = np.atleast_2d(np.asarray(self.Qc, dtype=float))
        object.__setattr__(self, "Qc", Qc)
        if Qc.shape[0] != Qc.shape[1] or not np.allclose(Qc, Qc.T):
            raise ValueError("Qc must be a symmetric square matrix")
        try:
            np.linalg.cholesky(Qc)
        except np.linalg.LinAlgError:
            raise ValueError("Qc must be positive definite") from None
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if self.num_support < 2:
            raise ValueError("need at least two support states")

    @classmethod
    def isotropic(cls, n: int, qc_scale: float, total_time: float, num_support: int) -> "GPParams":
        return cls(qc_scale * np.eye(n), float(total_time), int(num_support))

    @property
    def n(self) -> int:
        return self.Qc.shape[0]

    @property
    def dt(self) -> float:
        return self.total_time / (self.num_support - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.total_time, self.num_support)


@dataclass
class SupportState:
    theta: np.ndarray
    theta_dot: np.ndarray
    time: float

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.theta, self.theta_dot])


@dataclass
class GPTrajectory:
    """Support states ``(N+1, 2n)`` with the prior mean they were initialized from."""

    states: np.ndarray
    params: GPParams
    mean: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        expected = (self.params.num_support, 2 * self.params.n)
        if self.states.shape != expected or self.mean.shape != expected:
            raise ValueError(f"support states must have shape {expected}")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def times(self) -> np.ndarray:
        return self.params.times

    @property
    def theta(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def theta_dot(self) -> np.ndarray:
        return self.states[:, self.n:]

    def support(self, i: int) -> SupportState:
        return SupportState(self.theta[i].copy(), self.theta_dot[i].copy(), float(self.times[i]))

    def with_states(self, states: np.ndarray) -> "GPTrajectory":
        return replace(self, states=np.array(states, dtype=float))

    def copy(self) -> "GPTrajectory":
        return GPTrajectory(self.states.copy(), self.params, self.mean.copy())


def _phi_coeffs(dt):
    dt = np.asarray(dt, dtype=float)
    out = np.zeros(dt.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = dt
    out[..., 1, 1] = 1.0
    return out


def _q_coeffs(dt):
    dt = np.asarray(dt, dtype=float)
    out = np.empty(dt.shape + (2, 2))
    out[..., 0, 0] = dt**3 / 3.0
    out[..., 0, 1] = out[..., 1, 0] = dt**2 / 2.0
    out[..., 1, 1] = dt
    return out


def transition(params: GPParams, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """State transition ``Phi(dt)`` and process covariance ``Q(dt)``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return np.kron(_phi_coeffs(dt), np.eye(params.n)), np.kron(_q_coeffs(dt), params.Qc)


def q_inverse(params: GPParams, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("Q(dt) is singular for dt <= 0")
    c = np.array([[12.0 / dt**3, -6.0 / dt**2], [-6.0 / dt**2, 4.0 / dt]])
    return np.kron(c, np.linalg.inv(params.Qc))


def make_constant_velocity_prior(start, goal, params: GPParams) -> GPTrajectory:
    """Straight joint-space line from start to goal at constant velocity.

    The returned trajectory is both the optimizer's initialization and the
    prior mean.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if start.shape != (params.n,) or goal.shape != (params.n,):
        raise ValueError(f"start and goal must have {params.n} entries")
    s = params.times / params.total_time
    theta = start + s[:, None] * (goal - start)
    vel = np.broadcast_to((goal - start) / params.total_time, theta.shape)
    states = np.hstack([theta, vel])
    return GPTrajectory(states, params, states.copy())


def make_waypoint_prior(configs, indices, params: GPParams) -> GPTrajectory:
    """Piecewise-linear joint path through ``configs`` placed at support ``indices``.

    Velocities are the segment slopes; at interior waypoints the two adjacent
    slopes are averaged.
    """
    configs = np.asarray(configs, dtype=float)
    indices = list(indices)
    if indices[0] != 0 or indices[-1] != params.num_support - 1 or sorted(indices) != indices:
        raise ValueError("waypoint indices must increase from 0 to the last support index")
    t = params.times
    theta = np.empty((params.num_support, params.n))
    for k in range(params.n):
        theta[:, k] = np.interp(t, t[indices], configs[:, k])
    vel = np.empty_like(theta)
    slopes = np.diff(configs, axis=0) / np.diff(t[indices])[:, None]
    for i in range(params.num_support):
        seg = np.searchsorted(indices, i, side="right") - 1
        if i in indices[1:-1]:
            vel[i] = 0.5 * (slopes[seg - 1] + slopes[seg])
        else:
            vel[i] = slopes[min(seg, len(slopes) - 1)]
    states = np.hstack([theta, vel])
    return GPTrajectory(states, params, states.copy())


def gp_prior_factor(x_i, x_next, params: GPParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Binary prior factor between consecutive support states.

    Returns ``(r, J_i, J_next, Q)`` with ``r = Phi(dt) x_i - x_next``; the
    factor's cost is ``0.5 r^T Q^-1 r``.
    """
    Phi, Q = transition(params, params.dt)
    r = Phi @ np.asarray(x_i, dtype=float) - np.asarray(x_next, dtype=float)
    return r, Phi, -np.eye(2 * params.n), Q


def prior_cost(traj: GPTrajectory) -> float:
    """Sum of the GP prior factor costs (the smoothness cost)."""
    p = traj.params
    Phi, _ = transition(p, p.dt)
    Qinv = q_inverse(p, p.dt)
    r = traj.states[:-1] @ Phi.T - traj.states[1:]
    return 0.5 * float(np.einsum("ki,ij,kj->", r, Qinv, r))


def interpolation_matrices(params: GPParams, s: float) -> tuple[np.ndarray, np.ndarray]:
    """``Lambda``, ``Psi`` for a query ``s`` seconds after the left support time."""
    dt = params.dt
    if not -1e-12 <= s <= dt + 1e-12:
        raise ValueError("offset lies outside the support interval")
    Phi_s, Q_s = transition(params, max(s, 0.0))
    Phi_rest, _ = transition(params, max(dt - s, 0.0))
    Phi_dt, Q_dt = transition(params, dt)
    Psi = np.linalg.solve(Q_dt.T, (Q_s @ Phi_rest.T).T).T
    Lam = Phi_s - Psi @ Phi_dt
    return Lam, Psi


def interp_coeffs(s, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Scalar 2x2 forms of ``Lambda``/``Psi`` (the full matrices are ``kron(., I_n)``).

    ``Qc`` cancels out of both products, so batches of query offsets ``s`` can
    be handled without touching n x n blocks.
    """
    s = np.asarray(s, dtype=float)
    Qdt_inv = np.array([[12.0 / dt**3, -6.0 / dt**2], [-6.0 / dt**2, 4.0 / dt]])
    Psi = _q_coeffs(s) @ np.swapaxes(_phi_coeffs(dt - s), -1, -2) @ Qdt_inv
    Lam = _phi_coeffs(s) - Psi @ _phi_coeffs(dt)
    return Lam, Psi


def locate(params: GPParams, tau) -> tuple[np.ndarray, np.ndarray]:
    """Interval index and in-interval offset for query times."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-12) or np.any(tau > params.total_time + 1e-12):
        raise ValueError("query time outside [0, T]")
    idx = np.clip(np.floor(tau / params.dt).astype(int), 0, params.num_support - 2)
    return idx, tau - idx * params.dt


def interpolate(traj: GPTrajectory, tau: float) -> tuple[SupportState, np.ndarray, np.ndarray]:
    """State at ``tau`` plus the ``Lambda``/``Psi`` matrices used to produce it.

    With a prior mean on the constant-velocity model the mean terms cancel,
    so the state is ``Lambda x_i + Psi x_{i+1}``.
    """
    i, s = locate(traj.params, tau)
    i, s = int(i), float(s)
    Lam, Psi = interpolation_matrices(traj.params, s)
    mu_tau = Lam @ traj.mean[i] + Psi @ traj.mean[i + 1]
    x = mu_tau + Lam @ (traj.states[i] - traj.mean[i]) + Psi @ (traj.states[i + 1] - traj.mean[i + 1])
    n = traj.n
    return SupportState(x[:n], x[n:], float(tau)), Lam, Psi


def sample(traj: GPTrajectory, times) -> np.ndarray:
    """Vectorized interpolation of the full state at many times, shape ``(len(times), 2n)``."""
    p = traj.params
    idx, s = locate(p, times)
    Lam, Psi = interp_coeffs(s, p.dt)
    n = p.n
    xi = traj.states[idx].reshape(-1, 2, n)
    xj = traj.states[idx + 1].reshape(-1, 2, n)
    out = np.einsum("kab,kbn->kan", Lam, xi) + np.einsum("kab,kbn->kan", Psi, xj)
    return out.reshape(-1, 2 * n)


def dense_times(params: GPParams, per_interval: int) -> np.ndarray:
    """Support times plus ``per_interval`` evenly spaced interior times per interval."""
    frac = np.arange(per_interval + 1) / (per_interval + 1)
    t = (params.times[:-1, None] + frac[None, :] * params.dt).ravel()
    return np.append(t, params.total_time)


def interior_offsets(params: GPParams, per_interval: int) -> np.ndarray:
    return np.arange(1, per_interval + 1) * params.dt / (per_interval + 1)
