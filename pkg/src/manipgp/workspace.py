"""Signed distance fields for sphere and axis-aligned box obstacles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

FAR = 10.0  # distance reported for empty workspaces and out-of-bounds queries, m


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def distance(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = pts - self.center
        r = np.linalg.norm(v, axis=-1)
        grad = np.where(r[..., None] > 1e-12, v / np.maximum(r, 1e-12)[..., None], [1.0, 0.0, 0.0])
        return r - self.radius, grad


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_extents: np.ndarray

    def distance(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = pts - self.center
        sign = np.where(v >= 0, 1.0, -1.0)
        q = np.abs(v) - self.half_extents
        outside = np.maximum(q, 0.0)
        out_norm = np.linalg.norm(outside, axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        d = out_norm + inside
        g_out = sign * outside / np.maximum(out_norm, 1e-12)[..., None]
        face = np.argmax(q, axis=-1)
        g_in = np.zeros_like(v)
        np.put_along_axis(g_in, face[..., None], np.take_along_axis(sign, face[..., None], axis=-1), axis=-1)
        grad = np.where((out_norm > 0)[..., None], g_out, g_in)
        return d, grad


def parse_obstacles(items: Sequence[dict]) -> list:
    prims = []
    for o in items:
        kind = o.get("type")
        if kind == "sphere":
            prims.append(Sphere(np.asarray(o["center"], dtype=float), float(o["radius"])))
        elif kind == "box":
            prims.append(Box(np.asarray(o["center"], dtype=float), np.asarray(o["half_extents"], dtype=float)))
        else:
            raise ValueError(f"unknown obstacle type {kind!r}")
    return prims


class AnalyticSDF:
    """Exact signed distance to a union of primitives (no discretization)."""

    def __init__(self, primitives: Sequence):
        self.primitives = list(primitives)

    def query(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.primitives:
            return np.full(len(pts), FAR), np.zeros_like(pts), np.zeros(len(pts), dtype=bool)
        ds, gs = zip(*(p.distance(pts) for p in self.primitives))
        ds = np.stack(ds)
        k = np.argmin(ds, axis=0)
        rows = np.arange(len(pts))
        return ds[k, rows], np.stack(gs)[k, rows], np.zeros(len(pts), dtype=bool)


@dataclass(frozen=True)
class SDFGrid:
    """Distance samples on a regular grid; ``data`` is indexed ``[ix, iy, iz]``."""

    origin: np.ndarray
    cell_size: float
    dims: tuple[int, int, int]
    data: np.ndarray

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        if self.data.size != int(np.prod(self.dims)):
            raise ValueError("data length does not match grid dims")

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.cell_size * (np.asarray(self.dims) - 1)

    def _interp(self, pts: np.ndarray) -> np.ndarray:
        coords = ((pts - self.origin) / self.cell_size).T
        return ndimage.map_coordinates(self.data.reshape(self.dims), coords, order=1, mode="nearest")

    def query(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Trilinear distance, unit gradient, and an out-of-bounds flag per point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        oob = np.any(pts < self.origin - 1e-12, axis=1) | np.any(pts > self.upper + 1e-12, axis=1)
        d = self._interp(pts)
        h = 0.5 * self.cell_size
        grad = np.empty_like(pts)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            grad[:, k] = (self._interp(pts + e) - self._interp(pts - e)) / (2 * h)
        norm = np.linalg.norm(grad, axis=1)
        grad = np.where(norm[:, None] > 1e-9, grad / np.maximum(norm, 1e-300)[:, None], grad)
        d = np.where(oob, FAR, d)
        grad[oob] = 0.0
        return d, grad, oob


def build_sdf(primitives: Sequence, bounds, cell_size: float = 0.02) -> SDFGrid:
    """Sample the exact primitive distances on a grid covering ``bounds = (lo, hi)``."""
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(hi <= lo):
        raise ValueError("bounds must satisfy lo < hi")
    dims = tuple(int(v) for v in np.ceil((hi - lo) / cell_size).astype(int) + 1)
    if not primitives:
        return SDFGrid(lo, cell_size, dims, np.full(int(np.prod(dims)), FAR))
    axes = [lo[k] + cell_size * np.arange(dims[k]) for k in range(3)]
    field = np.full(dims, np.inf)
    exact = AnalyticSDF(primitives)
    # slab by slab along x to bound memory
    yy, zz = np.meshgrid(axes[1], axes[2], indexing="ij")
    for ix, x in enumerate(axes[0]):
        pts = np.column_stack([np.full(yy.size, x), yy.ravel(), zz.ravel()])
        field[ix] = exact.query(pts)[0].reshape(yy.shape)
    return SDFGrid(lo, float(cell_size), dims, field.ravel())
