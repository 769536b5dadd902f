"""Value iteration for the two-player game and explicit strategy rollouts.

One round of the game maps the value at time ``t - eps**2/2`` to the value at
time ``t``::

    new(x) = max{ psi_eps(x), max_v min( u(x + eps v), u(x - eps v) ) }

The sup over unit ``v`` runs over a finite hemisphere of directions, with an
optional per-node refinement of the best direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .curvature import tangent_basis
from .errors import DegenerateCenterError, InvalidStartError
from ._kernels import planar_round
from .grid import GridField, NodeSampler
from .obstacle import EnlargedObstacle, psi_eps


@dataclass(frozen=True)
class GameParams:
    eps: float
    n_rounds: int
    direction_count: int = None
    dim: int = 2
    refine: bool = False
    refine_iters: int = 6
    # use the compiled per-node loop for refined planar rounds
    compiled: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.direction_count is None:
            object.__setattr__(self, "direction_count", 32 if self.dim == 2 else 256)
        lo = 8 if self.dim == 2 else 64
        if self.direction_count < lo:
            raise ValueError(f"need at least {lo} directions in {self.dim}D")

    @classmethod
    def for_time(cls, eps, t0, **kw):
        """Parameters playing ``ceil(2 t0 / eps**2)`` rounds."""
        return cls(eps, rounds_for_time(eps, t0), **kw)

    @property
    def dt(self):
        return 0.5 * self.eps**2

    @property
    def t_final(self):
        return self.n_rounds * self.dt


def rounds_for_time(eps, t0):
    # guard against 2*t0/eps**2 landing a hair above an integer
    return int(math.ceil(2.0 * t0 / eps**2 - 1e-9))


@dataclass(frozen=True)
class DirectionSet:
    vectors: np.ndarray
    # polar angles in [0, pi) for the planar set, None in 3D
    angles: np.ndarray = None

    def __len__(self):
        return len(self.vectors)

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def angular_gap(self):
        if self.angles is not None:
            return math.pi / len(self.angles)
        # covering radius of a near-uniform hemisphere point set
        return math.sqrt(2.0 * math.pi / len(self.vectors))


def direction_set(dim, count) -> DirectionSet:
    """Unit vectors on a half-sphere, no two antipodal.

    2D: ``count`` equally spaced angles in [0, pi).  3D: a Fibonacci lattice
    on the upper hemisphere.
    """
    if dim == 2:
        th = math.pi * np.arange(count) / count
        return DirectionSet(np.stack([np.cos(th), np.sin(th)], axis=1), th)
    if dim != 3:
        raise ValueError("dimension must be 2 or 3")
    i = np.arange(count) + 0.5
    z = i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    v = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return DirectionSet(v / np.linalg.norm(v, axis=1, keepdims=True))


def moving_nodes(field: GridField, reach: float):
    """Nodes whose reads within ``reach`` can see more than one value.

    Every interpolated read at distance <= reach from a node uses grid values
    inside the cube of half-width ``ceil(reach/h) + 1`` cells (or the far value
    off the grid).  Where all of them agree, each read returns that value and
    the round leaves the node unchanged before the obstacle projection.
    """
    w = 2 * (int(math.ceil(reach / field.h - 1e-12)) + 1) + 1
    lo = ndimage.minimum_filter(field.values, size=w, mode="constant", cval=field.far_value)
    hi = ndimage.maximum_filter(field.values, size=w, mode="constant", cval=field.far_value)
    return hi > lo


def _check_pair(prev, psi_field):
    if not prev.same_grid(psi_field):
        raise ValueError("value field and obstacle field must share a grid")


class _Brackets:
    """Tracks, per node, the best bracket where ``u(x + eps v) - u(x - eps v)`` changes sign.

    ``phi(theta) = u(x + eps v) - u(x - eps v)`` is odd under theta -> theta + pi,
    so on the closed half-turn it always changes sign.  The extremal min/max
    over v sits at a crossing; directions arrive in angle order and the
    bracket with the best discrete score is kept.
    """

    def __init__(self, n_nodes, mode):
        self.mode = mode
        self.score = np.full(n_nodes, -np.inf if mode == "max" else np.inf)
        self.a = np.zeros(n_nodes)
        self.fa = np.zeros(n_nodes)
        self.fb = np.zeros(n_nodes)
        self.first = None
        self.last = None

    def _value(self, p, q):
        return np.minimum(p, q) if self.mode == "max" else np.maximum(p, q)

    def _offer(self, angle, p0, q0, phi1, val1):
        phi0 = p0 - q0
        val0 = self._value(p0, q0)
        change = np.sign(phi0) != np.sign(phi1)
        if self.mode == "max":
            sc = np.maximum(val0, val1)
            take = change & (sc > self.score)
        else:
            sc = np.minimum(val0, val1)
            take = change & (sc < self.score)
        self.score = np.where(take, sc, self.score)
        self.a = np.where(take, angle, self.a)
        self.fa = np.where(take, phi0, self.fa)
        self.fb = np.where(take, phi1, self.fb)

    def add(self, angle, p, q):
        if self.first is None:
            self.first = (p, q)
        else:
            pa, pp, pq = self.last
            self._offer(pa, pp, pq, p - q, self._value(p, q))
        self.last = (angle, p, q)

    def close(self):
        # the wrap-around bracket pairs the last direction with the first one reversed
        pa, pp, pq = self.last
        p0, q0 = self.first
        self._offer(pa, pp, pq, q0 - p0, self._value(p0, q0))


def _refine_planar(sampler, eps, width, br: _Brackets, best, iters):
    """Illinois regula falsi inside each node's bracket; keeps the best value seen."""
    has = np.isfinite(br.score)
    a = br.a.copy()
    b = a + width
    fa, fb = br.fa.copy(), br.fb.copy()
    last = np.zeros(len(a), dtype=np.int8)
    for _ in range(iters):
        den = fb - fa
        safe = den != 0
        c = np.where(safe, b - fb * (b - a) / np.where(safe, den, 1.0), 0.5 * (a + b))
        c = np.clip(c, a, b)
        off = eps * np.stack([np.cos(c), np.sin(c)], axis=1)
        p = sampler.at_offsets(off)
        q = sampler.at_offsets(-off)
        cand = br._value(p, q)
        if br.mode == "max":
            best = np.where(has, np.maximum(best, cand), best)
        else:
            best = np.where(has, np.minimum(best, cand), best)
        fc = p - q
        left = np.sign(fc) == np.sign(fa)
        # Illinois: halve an endpoint value that survives twice in a row
        fb = np.where(left & (last == 1), 0.5 * fb, fb)
        fa = np.where(~left & (last == 2), 0.5 * fa, fa)
        a = np.where(left, c, a)
        fa = np.where(left, fc, fa)
        b = np.where(left, b, c)
        fb = np.where(left, fb, fc)
        last = np.where(left, 1, 2).astype(np.int8)
    return best


def _refine_spatial(sampler, eps, dirs, best_idx, best, iters, gap):
    """Pattern search around each node's best discrete direction (3D)."""
    v = dirs[best_idx]
    step = 0.5 * gap
    for _ in range(iters):
        basis = tangent_basis(v)
        improved_v = v.copy()
        improved = best.copy()
        for col in range(2):
            for sgn in (1.0, -1.0):
                w = v + sgn * step * basis[:, :, col]
                w /= np.linalg.norm(w, axis=1, keepdims=True)
                cand = np.minimum(sampler.at_offsets(eps * w), sampler.at_offsets(-eps * w))
                up = cand > improved
                improved = np.where(up, cand, improved)
                improved_v = np.where(up[:, None], w, improved_v)
        best, v = improved, improved_v
        step *= 0.5
    return best


def dpp_step(prev: GridField, psi_field: GridField, params: GameParams, dirs: DirectionSet) -> GridField:
    """One round of the dynamic programming recursion at every node."""
    _check_pair(prev, psi_field)
    eps = params.eps
    planar = params.refine and dirs.angles is not None
    if planar and params.compiled:
        best = planar_round(prev.values, prev.far_value, eps / prev.h, dirs.angles, True, params.refine_iters,
                            moving_nodes(prev, eps))
        return prev.with_values(np.maximum(psi_field.values, best))
    sampler = NodeSampler(prev, eps)
    br = _Brackets(prev.values.size, "max") if planar else None
    best = np.full(prev.dims, -np.inf)
    best_idx = np.zeros(prev.dims, dtype=np.int64)
    for i, v in enumerate(dirs.vectors):
        p = sampler.shifted(eps * v)
        q = sampler.shifted(-eps * v)
        val = np.minimum(p, q)
        up = val > best
        best = np.where(up, val, best)
        if params.refine and not planar:
            best_idx = np.where(up, i, best_idx)
        if planar:
            br.add(dirs.angles[i], p.ravel(), q.ravel())
    if planar:
        br.close()
        best = _refine_planar(sampler, eps, math.pi / len(dirs), br, best.ravel(),
                              params.refine_iters).reshape(prev.dims)
    elif params.refine:
        best = _refine_spatial(sampler, eps, dirs.vectors, best_idx.ravel(), best.ravel(),
                               params.refine_iters, dirs.angular_gap).reshape(prev.dims)
    return prev.with_values(np.maximum(psi_field.values, best))


def _circle_in(n, count):
    """``count`` unit vectors spread over the full circle orthogonal to ``n``."""
    b = tangent_basis(n[None])[0]
    th = 2.0 * math.pi * np.arange(count) / count
    return np.cos(th)[:, None] * b[:, 0] + np.sin(th)[:, None] * b[:, 1]


def alt_dpp_step(prev: GridField, psi_field: GridField, params: GameParams, normal_dirs: DirectionSet,
                 tangent_count: int = 32) -> GridField:
    """One round of the subspace game.

    The minimizing player picks a hyperplane through the origin (given by a
    normal from ``normal_dirs``); the maximizing player then moves along any
    unit vector in it.
    """
    _check_pair(prev, psi_field)
    eps = params.eps
    sampler = NodeSampler(prev, eps)
    worst = np.full(prev.dims, np.inf)
    if prev.ndim == 2 and params.refine and params.compiled:
        # tangent angles run over [pi/2, 3pi/2); the kernel only needs increasing angles
        angles = normal_dirs.angles + 0.5 * math.pi
        worst = planar_round(prev.values, prev.far_value, eps / prev.h, angles, False, params.refine_iters,
                             moving_nodes(prev, eps))
    elif prev.ndim == 2:
        br = _Brackets(prev.values.size, "min") if params.refine else None
        for ang, n in zip(normal_dirs.angles, normal_dirs.vectors):
            t = np.array([-n[1], n[0]])
            p = sampler.shifted(eps * t)
            q = sampler.shifted(-eps * t)
            worst = np.minimum(worst, np.maximum(p, q))
            if br is not None:
                # tangent angle is the normal angle plus a quarter turn
                br.add(ang + 0.5 * math.pi, p.ravel(), q.ravel())
        if br is not None:
            br.close()
            worst = _refine_planar(sampler, eps, math.pi / len(normal_dirs), br, worst.ravel(),
                                   params.refine_iters).reshape(prev.dims)
    else:
        for n in normal_dirs.vectors:
            sup = np.full(prev.dims, -np.inf)
            for v in _circle_in(n, tangent_count):
                sup = np.maximum(sup, sampler.shifted(eps * v))
            worst = np.minimum(worst, sup)
    return prev.with_values(np.maximum(psi_field.values, worst))


def run_game(u0_field: GridField, psi_field: GridField, params: GameParams, dirs: DirectionSet = None,
             snapshot_every: int = 0, step=None, callback=None):
    """Iterate the round map ``params.n_rounds`` times.

    Returns ``[(round, field), ...]`` with round 0, every ``snapshot_every``-th
    round and the final round.  ``step`` swaps in another round map (for
    instance :func:`alt_dpp_step`); ``callback(round, field)`` sees every round
    and may return False to stop early.
    """
    if dirs is None:
        dirs = direction_set(params.dim, params.direction_count)
    step = step or dpp_step
    u = u0_field
    snaps = [(0, u)]
    for k in range(1, params.n_rounds + 1):
        u = step(u, psi_field, params, dirs)
        if callback is not None and callback(k, u) is False:
            snaps.append((k, u))
            break
        if k == params.n_rounds or (snapshot_every and k % snapshot_every == 0):
            snaps.append((k, u))
    return snaps


@dataclass
class Trajectory:
    positions: list = field(default_factory=list)
    # (direction, sign, stopped) per round
    choices: list = field(default_factory=list)
    start_time: float = 0.0

    @property
    def rounds(self):
        return len(self.positions) - 1

    @property
    def stopped(self):
        return bool(self.choices) and bool(self.choices[-1][2])

    def as_array(self):
        return np.array(self.positions)


def _start(x0, z):
    x = np.asarray(x0, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.linalg.norm(x - z) == 0.0:
        raise DegenerateCenterError("start position coincides with the centre; no orthogonal move defined")
    return x, z


def play_concentric_paul(x0, z, params: GameParams, carol_signs) -> Trajectory:
    """Paul always moves orthogonally to ``x - z``; Carol supplies the signs."""
    x, z = _start(x0, z)
    traj = Trajectory([x.copy()], [], params.t_final)
    for b in list(carol_signs)[:params.n_rounds]:
        v = tangent_basis((x - z)[None])[0][:, 0]
        x = x + float(b) * params.eps * v
        traj.positions.append(x.copy())
        traj.choices.append((v, int(np.sign(b)), False))
    return traj


def play_concentric_carol(x0, z, params: GameParams, paul_dirs) -> Trajectory:
    """Carol picks the sign that never brings the position closer to ``z``."""
    x, z = _start(x0, z)
    traj = Trajectory([x.copy()], [], params.t_final)
    for v in list(paul_dirs)[:params.n_rounds]:
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        b = 1 if np.dot(x - z, v) >= 0 else -1
        x = x + b * params.eps * v
        traj.positions.append(x.copy())
        traj.choices.append((v, b, False))
    return traj


def farthest_end_signs(x0, a, b, n):
    """Constant signs driving the position toward the segment end farther from ``x0``."""
    x0, a, b = (np.asarray(p, dtype=float) for p in (x0, a, b))
    s = 1 if np.linalg.norm(b - x0) >= np.linalg.norm(a - x0) else -1
    return [s] * n


def play_segment_paul(x0, a, b, enlarged: EnlargedObstacle, params: GameParams, carol_signs=None,
                      tol=1e-9) -> Trajectory:
    """Paul moves along ``(b - a)/|b - a|`` and stops once ``psi_eps(x) > 0``.

    ``carol_signs`` defaults to the constant push toward the far end of the
    segment.
    """
    x = np.asarray(x0, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    length = np.linalg.norm(d)
    if length == 0.0:
        raise InvalidStartError("segment endpoints coincide")
    v = d / length
    s = np.dot(x - a, v)
    if np.linalg.norm(x - a - s * v) > tol * max(1.0, length) or s < -tol or s > length + tol:
        raise InvalidStartError(f"start {x} is not on the segment from {a} to {b}")
    if carol_signs is None:
        carol_signs = farthest_end_signs(x, a, b, params.n_rounds)
    traj = Trajectory([x.copy()], [], params.t_final)
    signs = list(carol_signs)[:params.n_rounds]
    for k in range(len(signs) + 1):
        if psi_eps(enlarged, x) > 0:
            traj.choices.append((v, 0, True))
            return traj
        if k == len(signs):
            break
        sgn = 1 if signs[k] >= 0 else -1
        x = x + sgn * params.eps * v
        traj.positions.append(x.copy())
        traj.choices.append((v, sgn, False))
    return traj
