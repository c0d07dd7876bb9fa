"""Serial-chain kinematics for revolute manipulators.

A chain is a list of revolute joints. Each joint carries a fixed transform
from the previous link frame to the joint frame (``origin``) and a unit
rotation axis expressed in that joint frame. An optional fixed ``tool``
transform follows the last joint. Link frame ``k`` is the frame right after
joint ``k`` rotates; link ``n`` is the tool (end-effector) frame.

Jacobian rows are ordered linear ``xyz`` then angular ``xyz``. The task
dimension selects a prefix of those rows: 2 for planar ``(x, y)``, 3 for
position, 6 for full spatial velocity.

All functions accept a single configuration of shape ``(n,)`` or a batch of
shape ``(B, n)`` and return results with a matching leading dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

PINV_RTOL = 1e-8  # singular values below PINV_RTOL * sigma_max are dropped from J^+
M_MAX_SAFETY = 1.05

_TASK_ROWS = {2: (0, 1), 3: (0, 1, 2), 6: (0, 1, 2, 3, 4, 5)}


class ModelError(ValueError):
    """Raised for an invalid chain description."""


def rpy_to_matrix(rpy: Sequence[float]) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw to a rotation matrix, ``Rz(y) @ Ry(p) @ Rx(r)``."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _homogeneous(rot: np.ndarray, xyz: Sequence[float]) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = rot
    T[:3, 3] = xyz
    return T


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray
    origin: np.ndarray  # 4x4 transform from the previous link frame
    lower: float
    upper: float


@dataclass(frozen=True)
class CollisionSphere:
    link: int
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class ChainModel:
    """Immutable description of an n-DOF revolute serial chain.

    Use :meth:`from_dict`, :meth:`from_dh` or :func:`load_model` rather than
    constructing directly; they normalize and validate the inputs.
    """

    joints: tuple[Joint, ...]
    task_dim: int
    collision_spheres: tuple[CollisionSphere, ...] = ()
    tool: np.ndarray = field(default_factory=lambda: np.eye(4))
    m_max: float | None = None
    name: str = "chain"

    def __post_init__(self):
        n = len(self.joints)
        if n == 0:
            raise ModelError("chain has no joints")
        if self.task_dim not in _TASK_ROWS:
            raise ModelError(f"task_dim must be one of {sorted(_TASK_ROWS)}, got {self.task_dim}")
        if n < self.task_dim:
            raise ModelError(f"{n} joints cannot span a {self.task_dim}-dimensional task space")
        for k, jt in enumerate(self.joints):
            if abs(np.linalg.norm(jt.axis) - 1.0) > 1e-12:
                raise ModelError(f"joint {k} axis is not unit-norm: {jt.axis}")
            if not jt.lower < jt.upper:
                raise ModelError(f"joint {k} limits are not ordered: {jt.lower} >= {jt.upper}")
        for s in self.collision_spheres:
            if not 0 <= s.link <= n:
                raise ModelError(f"collision sphere attached to unknown link {s.link}")
            if s.radius < 0:
                raise ModelError("collision sphere radius must be nonnegative")
        if self.m_max is not None and not self.m_max > 0:
            raise ModelError("m_max must be positive")
        # cached stacked arrays for the batched routines
        object.__setattr__(self, "_axes", np.array([j.axis for j in self.joints]))
        object.__setattr__(self, "_origins", np.array([j.origin for j in self.joints]))
        object.__setattr__(self, "_skews", np.array([_skew(j.axis) for j in self.joints]))

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def with_m_max(self, m_max: float) -> "ChainModel":
        return replace(self, m_max=float(m_max))

    @classmethod
    def from_dict(cls, d: dict) -> "ChainModel":
        joints = []
        try:
            for k, jd in enumerate(d["joints"]):
                axis = np.asarray(jd["axis"], dtype=float)
                if axis.shape != (3,):
                    raise ModelError(f"joint {k} axis must have 3 entries")
                origin = jd.get("origin", {})
                T = _homogeneous(rpy_to_matrix(origin.get("rpy", (0.0, 0.0, 0.0))),
                                 origin.get("xyz", (0.0, 0.0, 0.0)))
                lim = jd.get("limits", {"lower": -math.pi, "upper": math.pi})
                joints.append(Joint(axis, T, float(lim["lower"]), float(lim["upper"])))
            spheres = tuple(
                CollisionSphere(int(s["link"]), np.asarray(s["center"], dtype=float), float(s["radius"]))
                for s in d.get("collision_spheres", [])
            )
            tool = d.get("tool", {})
            tool_T = _homogeneous(rpy_to_matrix(tool.get("rpy", (0.0, 0.0, 0.0))), tool.get("xyz", (0.0, 0.0, 0.0)))
            return cls(
                joints=tuple(joints),
                task_dim=int(d.get("task_dim", 6)),
                collision_spheres=spheres,
                tool=tool_T,
                m_max=d.get("m_max"),
                name=d.get("name", "chain"),
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed robot description: {exc!r}") from exc

    @classmethod
    def from_dh(cls, dh: Sequence[Sequence[float]], task_dim: int = 6, limits=None, **kw) -> "ChainModel":
        """Build from standard DH rows ``(d, a, alpha)``; joint ``k`` rotates about z."""
        n = len(dh)
        limits = limits if limits is not None else [(-math.pi, math.pi)] * n
        z = np.array([0.0, 0.0, 1.0])
        joints = []
        prev = np.eye(4)
        for k, (d, a, alpha) in enumerate(dh):
            joints.append(Joint(z, prev, float(limits[k][0]), float(limits[k][1])))
            prev = _dh_fixed(d, a, alpha)
        return cls(joints=tuple(joints), task_dim=task_dim, tool=prev, **kw)

    def to_dict(self) -> dict:
        def origin(T):
            R = T[:3, :3]
            pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
            roll = math.atan2(R[2, 1], R[2, 2])
            yaw = math.atan2(R[1, 0], R[0, 0])
            return {"xyz": T[:3, 3].tolist(), "rpy": [roll, pitch, yaw]}

        out = {
            "name": self.name,
            "task_dim": self.task_dim,
            "joints": [
                {"axis": j.axis.tolist(), "origin": origin(j.origin), "limits": {"lower": j.lower, "upper": j.upper}}
                for j in self.joints
            ],
            "tool": origin(self.tool),
            "collision_spheres": [
                {"link": s.link, "center": s.center.tolist(), "radius": s.radius} for s in self.collision_spheres
            ],
        }
        if self.m_max is not None:
            out["m_max"] = self.m_max
        return out


def _dh_fixed(d, a, alpha) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array([[1.0, 0, 0, a], [0, ca, -sa, 0], [0, sa, ca, d], [0, 0, 0, 1.0]])


def load_model(path: str | Path) -> ChainModel:
    with open(path) as f:
        return ChainModel.from_dict(json.load(f))


def _as_batch(model: ChainModel, q) -> tuple[np.ndarray, bool]:
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    Q = np.atleast_2d(q)
    if Q.ndim != 2 or Q.shape[1] != model.n:
        raise ValueError(f"expected configuration(s) with {model.n} joints, got shape {q.shape}")
    return Q, single


@dataclass
class ChainState:
    """Batched intermediate quantities of one forward pass."""

    frames: np.ndarray  # (B, n+1, 4, 4) link frames, last is the tool frame
    axes: np.ndarray  # (B, n, 3) joint axes in the world frame
    origins: np.ndarray  # (B, n, 3) joint positions in the world frame

    @property
    def ee_position(self) -> np.ndarray:
        return self.frames[:, -1, :3, 3]


def chain_state(model: ChainModel, Q: np.ndarray) -> ChainState:
    B, n = Q.shape
    frames = np.empty((B, n + 1, 4, 4))
    axes = np.empty((B, n, 3))
    origins = np.empty((B, n, 3))
    T = np.broadcast_to(np.eye(4), (B, 4, 4))
    s, c = np.sin(Q), np.cos(Q)
    for j in range(n):
        T = T @ model._origins[j]
        axes[:, j] = T[:, :3, :3] @ model._axes[j]
        origins[:, j] = T[:, :3, 3]
        K = model._skews[j]
        rot = np.eye(3) + s[:, j, None, None] * K + (1.0 - c[:, j, None, None]) * (K @ K)
        step = np.zeros((B, 4, 4))
        step[:, :3, :3] = rot
        step[:, 3, 3] = 1.0
        T = T @ step
        frames[:, j] = T
    frames[:, n] = T @ model.tool
    return ChainState(frames, axes, origins)


def forward_kinematics(model: ChainModel, q) -> np.ndarray:
    """Homogeneous transforms of every link frame, shape ``(n+1, 4, 4)`` (or batched)."""
    Q, single = _as_batch(model, q)
    frames = chain_state(model, Q).frames
    return frames[0] if single else frames


def ee_position(model: ChainModel, q) -> np.ndarray:
    Q, single = _as_batch(model, q)
    x = chain_state(model, Q).ee_position
    return x[0] if single else x


def point_jacobian(st: ChainState, points: np.ndarray, link: int) -> np.ndarray:
    """Linear-velocity Jacobian ``(B, 3, n)`` of points rigidly attached to ``link``."""
    n = st.axes.shape[1]
    J = np.cross(st.axes, points[:, None, :] - st.origins)  # (B, n, 3)
    if link < n - 1:
        J[:, link + 1:] = 0.0
    return J.transpose(0, 2, 1)


def _full_columns(st: ChainState) -> tuple[np.ndarray, np.ndarray]:
    lin = np.cross(st.axes, st.ee_position[:, None, :] - st.origins)  # (B, n, 3)
    return lin, st.axes


def _jacobian_batch(model: ChainModel, st: ChainState) -> np.ndarray:
    lin, ang = _full_columns(st)
    full = np.concatenate([lin, ang], axis=2).transpose(0, 2, 1)  # (B, 6, n)
    return full[:, _TASK_ROWS[model.task_dim], :]


def _hessian_batch(model: ChainModel, st: ChainState) -> np.ndarray:
    # dJ_i/dtheta_j is a_j x J_i for j < i (column rotated rigidly by an upstream joint)
    # and [a_i x J^lin_j, 0] for j >= i.
    lin, ang = _full_columns(st)
    n = lin.shape[1]
    a_j = ang[:, :, None, :]
    up_lin = np.cross(a_j, lin[:, None, :, :])  # (B, j, i, 3)
    up_ang = np.cross(a_j, ang[:, None, :, :])
    down_lin = np.cross(ang[:, None, :, :], lin[:, :, None, :])  # a_i x Jlin_j
    upstream = np.triu(np.ones((n, n), dtype=bool), k=1)[None, :, :, None]  # j < i
    H_lin = np.where(upstream, up_lin, down_lin)
    H_ang = np.where(upstream, up_ang, 0.0)
    H = np.concatenate([H_lin, H_ang], axis=3)  # (B, j, i, 6)
    return H.transpose(0, 1, 3, 2)[:, :, _TASK_ROWS[model.task_dim], :]  # (B, j, p, i)


def jacobian(model: ChainModel, q) -> np.ndarray:
    """Geometric end-effector Jacobian, ``(p, n)``."""
    Q, single = _as_batch(model, q)
    J = _jacobian_batch(model, chain_state(model, Q))
    return J[0] if single else J


def jacobian_hessian(model: ChainModel, q) -> np.ndarray:
    """All partials ``dJ/dtheta_j`` stacked as ``(n, p, n)`` (index j first)."""
    Q, single = _as_batch(model, q)
    H = _hessian_batch(model, chain_state(model, Q))
    return H[0] if single else H


def jacobian_partial(model: ChainModel, q, j: int) -> np.ndarray:
    """Analytic ``dJ/dtheta_j``, shape ``(p, n)``."""
    if not 0 <= j < model.n:
        raise IndexError(f"joint index {j} out of range for {model.n} joints")
    Q, single = _as_batch(model, q)
    H = _hessian_batch(model, chain_state(model, Q))[:, j]
    return H[0] if single else H


@dataclass
class ManipReport:
    m: float | np.ndarray
    singular_values: np.ndarray
    smallest_sv: float | np.ndarray


def truncated_pinv(J: np.ndarray, rtol: float = PINV_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Batched SVD pseudo-inverse with relative truncation; returns ``(J^+, sigma)``."""
    U, S, Vt = np.linalg.svd(J, full_matrices=False)
    cutoff = rtol * S[:, :1]
    inv = np.where((S > cutoff) & (S > 0), 1.0 / np.where(S > 0, S, 1.0), 0.0)
    pinv = np.einsum("bki,bk,bjk->bij", Vt, inv, U)
    return pinv, S


def _manip_and_grad(model: ChainModel, Q: np.ndarray, need_grad: bool = True):
    st = chain_state(model, Q)
    J = _jacobian_batch(model, st)
    if not need_grad:
        S = np.linalg.svd(J, compute_uv=False)
        return np.prod(S, axis=1), S, None
    pinv, S = truncated_pinv(J)
    m = np.prod(S, axis=1)
    H = _hessian_batch(model, st)
    trace = np.einsum("bjpi,bip->bj", H, pinv)
    return m, S, trace


def manipulability(model: ChainModel, q) -> ManipReport:
    """Manipulability index as the product of the Jacobian's singular values."""
    Q, single = _as_batch(model, q)
    m, S, _ = _manip_and_grad(model, Q, need_grad=False)
    if single:
        return ManipReport(float(m[0]), S[0], float(S[0, -1]))
    return ManipReport(m, S, S[:, -1])


def manipulability_trace(model: ChainModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(m, tr)`` with ``tr[j] = Tr(dJ/dtheta_j @ J^+)``; batched only."""
    Q, _ = _as_batch(model, q)
    m, _, trace = _manip_and_grad(model, Q)
    return m, trace


def manipulability_gradient(model: ChainModel, q) -> np.ndarray:
    """Gradient of the manipulability index, ``m * Tr(dJ/dtheta_j J^+)`` per joint.

    Near singularities the truncated pseudo-inverse biases the trace term, but
    the result stays finite; at ``m == 0`` the gradient is exactly zero.
    """
    Q, single = _as_batch(model, q)
    m, _, trace = _manip_and_grad(model, Q)
    g = m[:, None] * trace
    return g[0] if single else g


def estimate_m_max(model: ChainModel, samples: int = 100_000, seed: int = 0, chunk: int = 20_000) -> float:
    """Upper estimate of the manipulability ceiling by uniform sampling within joint limits."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = 0.0
    remaining = samples
    while remaining > 0:
        k = min(chunk, remaining)
        Q = rng.uniform(model.lower, model.upper, size=(k, model.n))
        m = _manip_and_grad(model, Q, need_grad=False)[0]
        best = max(best, float(m.max()))
        remaining -= k
    return M_MAX_SAFETY * best


def ensure_m_max(model: ChainModel, samples: int = 100_000, seed: int = 0) -> ChainModel:
    if model.m_max is not None:
        return model
    return model.with_m_max(estimate_m_max(model, samples, seed))


def planar_chain(lengths: Sequence[float], task_dim: int = 2, **kw) -> ChainModel:
    """Planar chain in the xy-plane with z-axis joints and the given link lengths."""
    z = np.array([0.0, 0.0, 1.0])
    joints = []
    offset = 0.0
    for k, length in enumerate(lengths):
        joints.append(Joint(z, _homogeneous(np.eye(3), (offset, 0.0, 0.0)), -math.pi, math.pi))
        offset = length
    return ChainModel(tuple(joints), task_dim, tool=_homogeneous(np.eye(3), (offset, 0.0, 0.0)), **kw)
