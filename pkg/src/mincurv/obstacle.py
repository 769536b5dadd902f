"""Analytic obstacles and their enlarged versions.

An obstacle is a union of balls and axis-aligned boxes described by the
1-Lipschitz shape function ``psi`` (positive inside).  Outside the union
``psi`` equals minus the distance to it, which makes the enlarged set
``K + B_r`` simply ``{psi > -r}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoverageError, EmptySetError
from .grid import GridField, GridSpec

# value of the shape function when there is no obstacle at all
NO_OBSTACLE = -1.0e9


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def psi(self, x):
        return self.radius - np.linalg.norm(x - np.asarray(self.center, float), axis=-1)

    def bbox(self, grow=0.0):
        c = np.asarray(self.center, float)
        r = self.radius + grow
        return c - r, c + r


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def psi(self, x):
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        q = np.maximum(lo - x, x - hi)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return -(outside + inside)

    def bbox(self, grow=0.0):
        return np.asarray(self.lo, float) - grow, np.asarray(self.hi, float) + grow


@dataclass(frozen=True)
class ObstacleSpec:
    primitives: tuple = ()
    dim: int = 2
    modulus: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if self.modulus < 1.0:
            # psi is 1-Lipschitz, so a smaller constant is not a modulus of continuity
            raise ValueError("modulus constant must be >= 1")

    @property
    def is_empty(self):
        return len(self.primitives) == 0

    def omega(self, s):
        return self.modulus * np.asarray(s, dtype=float)

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_empty:
            return np.full(x.shape[:-1], NO_OBSTACLE) if x.ndim > 1 else NO_OBSTACLE
        vals = np.max([p.psi(x) for p in self.primitives], axis=0)
        return float(vals) if x.ndim == 1 else vals

    def bbox(self, grow=0.0):
        boxes = [p.bbox(grow) for p in self.primitives]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)


def balls(centers, radii, dim=None, modulus=1.0):
    centers = [tuple(float(c) for c in ctr) for ctr in centers]
    if np.isscalar(radii):
        radii = [radii] * len(centers)
    dim = dim or len(centers[0])
    return ObstacleSpec(tuple(Ball(c, float(r)) for c, r in zip(centers, radii)), dim, modulus)


def two_balls(dim, separation=2.0, radius=1.0):
    """The reference obstacle: unit balls centred at +-separation on the first axis."""
    e = np.zeros(dim)
    e[0] = separation
    return balls([-e, e], radius, dim)


def psi_base(spec: ObstacleSpec, x):
    return spec.psi(x)


@dataclass(frozen=True)
class EnlargedObstacle:
    base: ObstacleSpec
    eps: float
    boundary_spacing: float = field(default=None)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.boundary_spacing is None:
            object.__setattr__(self, "boundary_spacing", self.eps / 4.0)

    @property
    def enlarge_radius(self):
        return self.base.dim * self.eps

    @property
    def C_eps(self):
        return float(2.0 * self.base.omega(2.0 * self.base.dim * self.eps))

    def contains(self, x):
        """Membership in the open enlarged set K + B_r."""
        return np.asarray(self.base.psi(x)) > -self.enlarge_radius

    def boundary_points(self, min_per_primitive=100):
        return enlarged_boundary_samples(self, min_per_primitive)


def _sphere_points(n, dim):
    if dim == 2:
        t = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _count_for_spacing(radius, spacing, dim, minimum):
    if dim == 2:
        n = math.ceil(2.0 * math.pi * radius / spacing)
    else:
        # Fibonacci points: mean spacing ~ sqrt(4 pi R^2 / n); keep a 2x margin
        n = math.ceil(2.0 * 4.0 * math.pi * radius * radius / spacing**2)
    return max(int(n), int(minimum))


def _primitive_boundary(prim, r, spacing, dim, minimum):
    if isinstance(prim, Ball):
        R = prim.radius + r
        dirs = _sphere_points(_count_for_spacing(R, spacing, dim, minimum), dim)
        return np.asarray(prim.center, float) + R * dirs
    # star-shaped about the box centre: bisect along rays for psi == -r
    lo, hi = np.asarray(prim.lo, float), np.asarray(prim.hi, float)
    c = 0.5 * (lo + hi)
    R = 0.5 * np.linalg.norm(hi - lo) + r
    dirs = _sphere_points(_count_for_spacing(R, spacing, dim, minimum), dim)
    a = np.zeros(len(dirs))
    b = np.full(len(dirs), R + spacing)
    for _ in range(60):
        m = 0.5 * (a + b)
        inside = prim.psi(c + m[:, None] * dirs) > -r
        a = np.where(inside, m, a)
        b = np.where(inside, b, m)
    return c + (0.5 * (a + b))[:, None] * dirs


def enlarged_boundary_samples(enlarged: EnlargedObstacle, min_per_primitive=100):
    """Points on the boundary of K + B_r, mesh width <= ``boundary_spacing``."""
    spec = enlarged.base
    if spec.is_empty:
        raise EmptySetError("obstacle is empty; its enlargement has no boundary")
    r = enlarged.enlarge_radius
    pts = np.concatenate([
        _primitive_boundary(p, r, enlarged.boundary_spacing, spec.dim, min_per_primitive)
        for p in spec.primitives
    ])
    # drop samples swallowed by another enlarged primitive
    keep = spec.psi(pts) <= -r + 1e-9
    return pts[keep]


def h_eps(enlarged: EnlargedObstacle, x, boundary_samples=100):
    """Inf/sup-convolution of psi restricted to the enlarged boundary.

    Minimum over boundary samples y of psi(y) + 2 omega(|x - y|) when x lies
    in the enlarged set, maximum of psi(y) - 2 omega(|x - y|) otherwise.
    """
    if boundary_samples < 100:
        raise ValueError("boundary_samples must be >= 100")
    ys = enlarged_boundary_samples(enlarged, boundary_samples)
    spec = enlarged.base
    x = np.asarray(x, dtype=float)
    psi_y = spec.psi(ys)
    d = np.linalg.norm(ys - x, axis=1)
    if enlarged.contains(x):
        return float(np.min(psi_y + 2.0 * spec.omega(d)))
    return float(np.max(psi_y - 2.0 * spec.omega(d)))


def _combine(psi, h, inside, C):
    return np.where(
        inside,
        np.maximum(psi, np.minimum(h - psi, C)),
        np.minimum(psi, np.maximum(h - psi, -C)),
    )


def psi_eps(enlarged: EnlargedObstacle, x, boundary_samples=100):
    """Obstacle for the game: positive exactly on the enlarged set, close to psi."""
    spec = enlarged.base
    if spec.is_empty:
        return NO_OBSTACLE
    x = np.asarray(x, dtype=float)
    psi = float(spec.psi(x))
    h = h_eps(enlarged, x, boundary_samples)
    return float(_combine(psi, h, bool(enlarged.contains(x)), enlarged.C_eps))


def h_eps_many(enlarged: EnlargedObstacle, pts, boundary_samples=100):
    """h_eps at many points.

    On the enlarged boundary psi equals -r for ball/box unions, so the
    extremal boundary point is the nearest one and a k-d tree query gives
    the exact sampled min/max.  Falls back to brute force otherwise.
    """
    spec = enlarged.base
    ys = enlarged_boundary_samples(enlarged, boundary_samples)
    psi_y = spec.psi(ys)
    pts = np.asarray(pts, dtype=float).reshape(-1, spec.dim)
    inside = enlarged.contains(pts)
    if np.ptp(psi_y) <= 1e-9:
        d, _ = cKDTree(ys).query(pts)
        val = psi_y[0]
        return np.where(inside, val + 2.0 * spec.omega(d), val - 2.0 * spec.omega(d))
    out = np.empty(len(pts))
    for start in range(0, len(pts), 2048):
        chunk = pts[start:start + 2048]
        d = np.linalg.norm(chunk[:, None, :] - ys[None], axis=2)
        lo = np.min(psi_y + 2.0 * spec.omega(d), axis=1)
        hi = np.max(psi_y - 2.0 * spec.omega(d), axis=1)
        out[start:start + 2048] = np.where(inside[start:start + 2048], lo, hi)
    return out


def psi_eps_field(enlarged: EnlargedObstacle, grid: GridSpec, boundary_samples=100) -> GridField:
    """psi_eps sampled at every node of ``grid``."""
    spec = enlarged.base
    if spec.is_empty:
        return GridField(grid.origin, grid.h, np.full(grid.dims, NO_OBSTACLE), NO_OBSTACLE)
    lo, hi = spec.bbox(enlarged.enlarge_radius)
    if np.any(lo < np.asarray(grid.origin) - 1e-12) or np.any(hi > grid.upper + 1e-12):
        raise CoverageError(
            f"grid box [{np.asarray(grid.origin)}, {grid.upper}] does not cover the enlarged obstacle [{lo}, {hi}]"
        )
    pts = grid.positions().reshape(-1, spec.dim)
    psi = spec.psi(pts)
    out = psi.copy()
    C = enlarged.C_eps
    # away from the shell |psi| < C both branches reduce to psi itself
    near = np.abs(psi) < C
    if near.any():
        h = h_eps_many(enlarged, pts[near], boundary_samples)
        out[near] = _combine(psi[near], h, enlarged.contains(pts[near]), C)
    return GridField(grid.origin, grid.h, out.reshape(grid.dims), float(np.min(out)))
