"""Kinematic-control baselines for the reaching benchmark.

Both are stand-ins for published controllers rather than replications:

* ``dls`` tracks the goal with damped least squares whose damping ramps up
  as the smallest singular value of the position Jacobian drops below a
  threshold (singularity-robust inverse).
* ``nullspace`` tracks with the pseudo-inverse and climbs the manipulability
  gradient inside the null space of the position task.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .kinematics import ChainModel, chain_state, manipulability, manipulability_gradient, point_jacobian, truncated_pinv


@dataclass
class TrackerOptions:
    dt: float = 0.02
    gain: float = 0.5
    damping_eps: float = 0.05
    damping_max: float = 0.1
    nullspace_gain: float = 1.0
    vel_limit: float = math.pi / 3
    tol: float = 1e-3
    timeout: float = 30.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.gain < 0 or self.nullspace_gain < 0:
            raise ValueError("gains must be nonnegative")


def _task(model: ChainModel, q):
    st = chain_state(model, np.atleast_2d(q))
    x = st.ee_position[0]
    J = point_jacobian(st, st.ee_position, model.n)[0]
    return x, J


def _clip(w: np.ndarray, limit: float) -> np.ndarray:
    # uniform scaling keeps the direction and bounds every joint
    peak = np.abs(w).max()
    return w * (limit / peak) if peak > limit else w


def dls_damping(smallest_sv: float, opts: TrackerOptions) -> float:
    """Damping that ramps from 0 to ``damping_max`` inside the singular region."""
    if smallest_sv >= opts.damping_eps:
        return 0.0
    return opts.damping_max * math.sqrt(1.0 - (smallest_sv / opts.damping_eps) ** 2)


def dls_tracker_step(model: ChainModel, q, x_goal, opts: TrackerOptions) -> np.ndarray:
    x, J = _task(model, q)
    e = opts.gain * (np.asarray(x_goal, dtype=float) - x)
    sv = np.linalg.svd(J, compute_uv=False)
    lam = dls_damping(float(sv[-1]), opts)
    w = J.T @ np.linalg.solve(J @ J.T + lam**2 * np.eye(len(e)), e)
    return _clip(w, opts.vel_limit)


def nullspace_projector(J: np.ndarray) -> np.ndarray:
    pinv = truncated_pinv(J[None])[0][0]
    return np.eye(J.shape[1]) - pinv @ J


def nullspace_manip_tracker_step(model: ChainModel, q, x_goal, opts: TrackerOptions) -> np.ndarray:
    x, J = _task(model, q)
    if model.n <= J.shape[0]:
        return dls_tracker_step(model, q, x_goal, opts)
    pinv = truncated_pinv(J[None])[0][0]
    e = opts.gain * (np.asarray(x_goal, dtype=float) - x)
    N = np.eye(model.n) - pinv @ J
    w = pinv @ e + N @ (opts.nullspace_gain * manipulability_gradient(model, q))
    return _clip(w, opts.vel_limit)


POLICIES = {"dls": dls_tracker_step, "nullspace": nullspace_manip_tracker_step}


@dataclass
class TrackerTrace:
    q: np.ndarray  # (steps+1, n)
    omega: np.ndarray  # (steps, n)
    m: np.ndarray  # (steps+1,)
    success: bool
    wall_time: float

    def metrics(self) -> dict:
        vinf = np.abs(self.omega).max(axis=1) if len(self.omega) else np.zeros(1)
        return {
            "manip": {"avg": float(self.m.mean()), "min": float(self.m.min()), "max": float(self.m.max())},
            "velocity": {"max": float(vinf.max()), "avg": float(vinf.mean())},
            "solved": bool(self.success),
            "steps": int(len(self.omega)),
        }


def run_tracker(model: ChainModel, q0, x_goal, opts: TrackerOptions, policy: str = "dls") -> TrackerTrace:
    """Fixed-step Euler rollout ``q <- q + dt * omega`` until the goal is reached or time runs out."""
    step = POLICIES[policy]
    t0 = time.perf_counter()
    q = np.array(q0, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    qs, ws = [q.copy()], []
    success = False
    for _ in range(int(round(opts.timeout / opts.dt)) + 1):
        x, _ = _task(model, q)
        if np.linalg.norm(x_goal - x) < opts.tol:
            success = True
            break
        if len(ws) * opts.dt >= opts.timeout:
            break
        w = step(model, q, x_goal, opts)
        q = model.clamp(q + opts.dt * w)
        ws.append(w)
        qs.append(q.copy())
    Q = np.array(qs)
    m = manipulability(model, Q).m
    return TrackerTrace(Q, np.array(ws).reshape(-1, model.n), m, success, time.perf_counter() - t0)
