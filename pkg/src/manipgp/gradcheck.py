"""Finite-difference audit of every analytic derivative used by the planner."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .factors import ManipFactorParams, collision_cost, collision_cost_jacobian, goal_position_residual, manip_cost, manip_cost_gradient
from .kinematics import (
    ChainModel,
    CollisionSphere,
    ensure_m_max,
    forward_kinematics,
    jacobian,
    manipulability,
    manipulability_gradient,
)
from .workspace import AnalyticSDF, Sphere

THRESHOLD = 1e-4
STEP = 1e-6
KNEE_GUARD = 1e-4  # skip hinge terms this close to their kink


@dataclass
class CheckResult:
    name: str
    max_error: float = 0.0
    worst_q: list | None = None
    checked: int = 0

    def update(self, err: float, q: np.ndarray) -> None:
        self.checked += 1
        if err > self.max_error or self.worst_q is None:
            self.max_error = max(err, self.max_error)
            self.worst_q = q.tolist()

    @property
    def ok(self) -> bool:
        return self.max_error < THRESHOLD


@dataclass
class GradcheckReport:
    robot: str
    samples: int
    seed: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "robot": self.robot,
            "samples": self.samples,
            "seed": self.seed,
            "threshold": THRESHOLD,
            "ok": self.ok,
            "checks": {
                c.name: {"max_rel_error": c.max_error, "ok": c.ok, "checked": c.checked, "worst_q": c.worst_q}
                for c in self.checks
            },
        }


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-6)
    return float(np.abs(a - b).max(initial=0.0) / scale)


def _central(f, q: np.ndarray, h: float = STEP) -> np.ndarray:
    cols = []
    for j in range(len(q)):
        e = np.zeros_like(q)
        e[j] = h
        cols.append((np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def _jacobian_fd(model: ChainModel, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian by differencing the end-effector pose."""
    T0 = forward_kinematics(model, q)[-1]
    cols = []
    for j in range(model.n):
        e = np.zeros(model.n)
        e[j] = STEP
        Tp = forward_kinematics(model, q + e)[-1]
        Tm = forward_kinematics(model, q - e)[-1]
        v = (Tp[:3, 3] - Tm[:3, 3]) / (2 * STEP)
        W = (Tp[:3, :3] - Tm[:3, :3]) / (2 * STEP) @ T0[:3, :3].T
        w = 0.5 * np.array([W[2, 1] - W[1, 2], W[0, 2] - W[2, 0], W[1, 0] - W[0, 1]])
        cols.append(np.concatenate([v, w]))
    return np.stack(cols, axis=1)[: model.task_dim]


def _probe_model(model: ChainModel) -> ChainModel:
    """Robots without collision geometry get one probe sphere per link frame."""
    if model.collision_spheres:
        return model
    probes = tuple(CollisionSphere(k, np.zeros(3), 0.05) for k in range(1, model.n + 1))
    return replace(model, collision_spheres=probes)


def run_gradcheck(model: ChainModel, samples: int = 100, seed: int = 0, name: str = "robot") -> GradcheckReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    model = ensure_m_max(model, 20_000, seed)
    # a sharp cost shaping constant exercises the curvature of the log cost
    mp = ManipFactorParams(1e-4, 0.01 * model.m_max, model.m_max)
    cmodel = _probe_model(model)
    eps = 0.3
    checks = {k: CheckResult(k) for k in ("jacobian", "manipulability_gradient", "singularity_cost_gradient",
                                          "goal_factor", "collision_factor")}
    span = model.upper - model.lower
    for _ in range(samples):
        q = rng.uniform(model.lower + 0.01 * span, model.upper - 0.01 * span)
        checks["jacobian"].update(_rel(jacobian(model, q), _jacobian_fd(model, q)), q)
        checks["manipulability_gradient"].update(
            _rel(manipulability_gradient(model, q), _central(lambda x: manipulability(model, x).m, q)), q)
        checks["singularity_cost_gradient"].update(
            _rel(manip_cost_gradient(model, q, mp), _central(lambda x: manip_cost(model, x, mp), q)), q)
        goal = rng.normal(size=3)
        _, Jg = goal_position_residual(model, q, goal)
        checks["goal_factor"].update(_rel(Jg, _central(lambda x: goal_position_residual(model, x, goal)[0], q)), q)

        # obstacle placed near a random collision sphere so some hinges are active
        k = int(rng.integers(len(cmodel.collision_spheres)))
        sph = cmodel.collision_spheres[k]
        T = forward_kinematics(cmodel, q)[sph.link]
        centre = T[:3, :3] @ sph.center + T[:3, 3]
        direction = rng.normal(size=3)
        sdf = AnalyticSDF([Sphere(centre + 0.25 * direction / np.linalg.norm(direction), 0.1)])
        jac = collision_cost_jacobian(cmodel, sdf, q, eps)
        fd = _central(lambda x: collision_cost(cmodel, sdf, x, eps).costs, q)
        d, _, _ = sdf.query(_sphere_centres(cmodel, q))
        margin = eps - d + np.array([s.radius for s in cmodel.collision_spheres])
        keep = np.abs(margin) > KNEE_GUARD
        checks["collision_factor"].update(_rel(jac[keep], fd[keep]), q)
    return GradcheckReport(name, samples, seed, list(checks.values()))


def _sphere_centres(model: ChainModel, q: np.ndarray) -> np.ndarray:
    frames = forward_kinematics(model, q)
    out = []
    for s in model.collision_spheres:
        T = frames[s.link]
        out.append(T[:3, :3] @ s.center + T[:3, 3])
    return np.array(out)
