"""Discrete convexity: eps-segments, eps-convex hulls and segment complexes.

Point sets are ``(k, N)`` float arrays.  Two points closer than the snap
tolerance (1e-9) are treated as one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptySetError, PreconditionError
from .grid import GridField, interpolate
from .hull import convex_hull
from .obstacle import Ball, Box, ObstacleSpec

SNAP_TOL = 1e-9
RATIO_TOL = 1e-9


def as_points(pts, dim=None):
    a = np.asarray(pts, dtype=float)
    if a.size == 0:
        return np.zeros((0, dim or 2))
    return np.atleast_2d(a)


def dedup(points, tol=SNAP_TOL):
    """Drop points within ``tol`` of an earlier point; order is kept."""
    pts = as_points(points)
    if len(pts) <= 1:
        return pts.copy()
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return pts.copy()
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(pts))])
    return pts[roots == np.arange(len(pts))]


def commensurable_steps(dist, eps, ratio_tol=RATIO_TOL):
    """``M`` with ``dist = M eps`` up to the relative tolerance, else 0."""
    ratio = dist / eps
    m = int(round(ratio))
    if m >= 1 and abs(ratio - m) <= ratio_tol * max(1.0, ratio):
        return m
    return 0


def eps_segment(x, y, eps, ratio_tol=RATIO_TOL):
    """M+1 equally spaced points from x to y when |x - y| = M eps, else {x, y}."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = commensurable_steps(float(np.linalg.norm(y - x)), eps, ratio_tol)
    if m == 0:
        return dedup(np.stack([x, y]))
    t = np.arange(m + 1)[:, None] / m
    return x + t * (y - x)


def _pair_segments(pts, eps, ratio_tol, only_new_from=0):
    """All eps-segment interior points for pairs (i, j), j >= only_new_from."""
    n = len(pts)
    if n < 2:
        return np.zeros((0, pts.shape[1]))
    i, j = np.triu_indices(n, k=1)
    if only_new_from:
        keep = j >= only_new_from
        i, j = i[keep], j[keep]
    d = np.linalg.norm(pts[j] - pts[i], axis=1)
    ratio = d / eps
    m = np.rint(ratio).astype(np.int64)
    ok = (m >= 2) & (np.abs(ratio - m) <= ratio_tol * np.maximum(1.0, ratio))
    out = []
    for a, b, k in zip(pts[i[ok]], pts[j[ok]], m[ok]):
        t = np.arange(1, k)[:, None] / k
        out.append(a + t * (b - a))
    if not out:
        return np.zeros((0, pts.shape[1]))
    return np.concatenate(out)


def ell_one_eps(A, eps, ratio_tol=RATIO_TOL):
    """A together with the eps-segments of all its pairs."""
    pts = dedup(A)
    return dedup(np.concatenate([pts, _pair_segments(pts, eps, ratio_tol)]))


@dataclass
class EpsHullResult:
    points: np.ndarray
    converged: bool
    # smallest j >= 1 with l^{j,eps}(A) == l^{j+1,eps}(A), or the last j tried
    iterations: int
    # co_eps is only ever computed on finite samples
    semantics: str = "finite-sample"


def eps_convex_hull(A, eps, max_iter=50, ratio_tol=RATIO_TOL) -> EpsHullResult:
    """Iterate ``ell_one_eps`` until no new point appears or ``max_iter`` runs out."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    cur = dedup(A)
    j = 0
    for it in range(1, max_iter + 1):
        # pairs among old points were already expanded; only pairs touching new ones can add
        nxt = dedup(np.concatenate([cur, _pair_segments(cur, eps, ratio_tol, 0 if it == 1 else n_old)]))
        if len(nxt) == len(cur):
            return EpsHullResult(cur, True, max(j, 1))
        n_old = len(cur)
        cur = nxt
        j = it
    return EpsHullResult(cur, False, j)


def is_eps_convex(points, eps, ratio_tol=RATIO_TOL, tol=SNAP_TOL):
    """Exhaustive pair check: every eps-segment stays inside the set."""
    pts = dedup(points)
    extra = _pair_segments(pts, eps, ratio_tol)
    if len(extra) == 0:
        return True
    d, _ = cKDTree(pts).query(extra)
    return bool(np.all(d <= tol))


def voxel_net(points, cell):
    """One representative point per occupied cube of side ``cell``."""
    pts = as_points(points)
    if len(pts) == 0:
        return pts
    keys = np.floor(pts / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(first)]


def _sample_segments(a, b, spacing):
    """Points along each segment a[i] -> b[i], at most ``spacing`` apart."""
    d = np.linalg.norm(b - a, axis=1)
    n = np.maximum(1, np.ceil(d / spacing).astype(np.int64))
    out = []
    for k in np.unique(n):
        sel = n == k
        t = (np.arange(k + 1) / k)[None, :, None]
        out.append((a[sel][:, None, :] + t * (b[sel] - a[sel])[:, None, :]).reshape(-1, a.shape[1]))
    return np.concatenate(out) if out else np.zeros((0, a.shape[1]))


def hull_via_ellN(A, delta, chunk=200000):
    """Dense sample of co(A) as the N-th iterate of the segment operator.

    Each iterate is reduced to a voxel net of side ``delta/2`` before the
    pairwise segments are drawn at spacing ``delta/2``.
    """
    cur = dedup(A)
    if len(cur) == 0:
        raise EmptySetError("empty point set")
    n_dim = cur.shape[1]
    cell = 0.5 * delta
    for _ in range(n_dim):
        net = voxel_net(cur, cell)
        i, j = np.triu_indices(len(net), k=1)
        parts = [cur]
        for s in range(0, len(i), chunk):
            seg = _sample_segments(net[i[s:s + chunk]], net[j[s:s + chunk]], cell)
            parts.append(voxel_net(seg, cell / 2))
        cur = voxel_net(np.concatenate(parts), cell / 2)
    return cur


def overlap_radius(eps, N):
    """h with h**2 = (N eps - eps/2)**2 - (eps/2)**2 = N (N - 1) eps**2."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    delta = N * eps - 0.5 * eps
    return math.sqrt(delta * delta - 0.25 * eps * eps)


# --------------------------------------------------------------------------
# segment complexes and the cross-segment operator


def _snap_key(p, tol=1e-7):
    return tuple(np.round(np.asarray(p) / tol).astype(np.int64))


def _triangle_samples(tri, spacing):
    """Barycentric lattice over each triangle (a, b, c) with edge steps <= spacing."""
    out = []
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    longest = np.max(np.stack([np.linalg.norm(b - a, axis=1), np.linalg.norm(c - a, axis=1),
                               np.linalg.norm(c - b, axis=1)]), axis=0)
    n = np.maximum(1, np.ceil(longest / spacing).astype(np.int64))
    for k in np.unique(n):
        sel = n == k
        ii, jj = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        keep = ii + jj <= k
        s = (ii[keep] / k)[None, :, None]
        t = (jj[keep] / k)[None, :, None]
        aa, bb, cc = a[sel][:, None], b[sel][:, None], c[sel][:, None]
        out.append((aa + s * (bb - aa) + t * (cc - aa)).reshape(-1, tri.shape[2]))
    return np.concatenate(out) if out else np.zeros((0, tri.shape[2]))


@dataclass
class SegmentComplex:
    """Union of segments plus cross-segment families.

    A family ``(a, b, c)`` stands for every segment from a point of
    ``[a, b]`` to a point of ``[a, c]``; its union is the triangle abc.
    """

    segments: np.ndarray
    families: np.ndarray = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 2, self.dim_hint())
        if self.families is None:
            self.families = np.zeros((0, 3, self.segments.shape[2]))
        self.families = np.asarray(self.families, dtype=float).reshape(-1, 3, self.segments.shape[2])

    def dim_hint(self):
        s = np.asarray(self.segments)
        if s.ndim == 3:
            return s.shape[2]
        if self.families is not None and np.asarray(self.families).size:
            return np.asarray(self.families).shape[-1]
        return 2

    @property
    def dim(self):
        return self.segments.shape[2]

    def vertices(self):
        parts = [self.segments.reshape(-1, self.dim), self.families.reshape(-1, self.dim)]
        return dedup(np.concatenate(parts), 1e-7)

    def sample(self, delta):
        parts = [np.zeros((0, self.dim))]
        if len(self.segments):
            parts.append(_sample_segments(self.segments[:, 0], self.segments[:, 1], delta))
        if len(self.families):
            parts.append(_triangle_samples(self.families, delta))
        return voxel_net(np.concatenate(parts), delta / 4)

    def pieces(self):
        """Connected pieces, each a list of vertex keys (union-find on shared points)."""
        parent = {}

        def find(k):
            parent.setdefault(k, k)
            while parent[k] != k:
                parent[k] = parent[parent[k]]
                k = parent[k]
            return k

        def union(p, q):
            rp, rq = find(p), find(q)
            if rp != rq:
                parent[max(rp, rq)] = min(rp, rq)

        for a, b in self.segments:
            union(_snap_key(a), _snap_key(b))
        for a, b, c in self.families:
            union(_snap_key(a), _snap_key(b))
            union(_snap_key(a), _snap_key(c))
        # a vertex lying inside another segment joins it (polygonal paths may cross)
        keys = list(parent)
        pts = np.array(keys, dtype=float) * 1e-7 if keys else np.zeros((0, self.dim))
        for a, b in self.segments:
            ab = b - a
            L2 = float(ab @ ab)
            if L2 == 0 or not len(pts):
                continue
            t = np.clip((pts - a) @ ab / L2, 0.0, 1.0)
            on = np.linalg.norm(a + t[:, None] * ab - pts, axis=1) <= 1e-7
            for k in np.nonzero(on)[0]:
                union(keys[k], _snap_key(a))
        groups = {}
        for k in parent:
            groups.setdefault(find(k), []).append(k)
        return list(groups.values())

    def is_connected(self):
        return len(self.pieces()) <= 1


def _incident(gamma: SegmentComplex, delta):
    """Group ``(point, far endpoint)`` pairs by the shared point.

    Segments contribute their two endpoints.  A family (a, b, c) contributes,
    for every sample point p on [a, b], the extreme far endpoints {a, c} of
    its segments through p (and symmetrically on [a, c]).
    Yields ``(p, fars)`` with ``fars`` an array of far endpoints.
    """
    dim = gamma.dim
    ps = [gamma.segments[:, 0], gamma.segments[:, 1]]
    fs = [gamma.segments[:, 1], gamma.segments[:, 0]]
    fam = gamma.families
    if len(fam):
        a = fam[:, 0]
        for side, other in ((fam[:, 1], fam[:, 2]), (fam[:, 2], fam[:, 1])):
            pts = _sample_segments(a, side, delta)
            n = np.maximum(1, np.ceil(np.linalg.norm(side - a, axis=1) / delta).astype(np.int64))
            # _sample_segments groups by step count; rebuild the owner index the same way
            owner = np.concatenate([np.repeat(np.nonzero(n == k)[0], k + 1) for k in np.unique(n)])
            for far in (a, other):
                ps.append(pts)
                fs.append(far[owner])
    P = np.concatenate(ps).reshape(-1, dim)
    F = np.concatenate(fs).reshape(-1, dim)
    keep = np.linalg.norm(F - P, axis=1) > 1e-7
    P, F = P[keep], F[keep]
    keys = np.round(P / 1e-7).astype(np.int64)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.flatnonzero(np.diff(inv[order])) + 1
    for grp in np.split(order, bounds):
        if len(grp):
            yield P[grp[0]], F[grp]


def _extreme(points):
    pts = dedup(points, 1e-7)
    if len(pts) <= 2 or pts.shape[1] != 2:
        return pts
    hull = convex_hull(pts)
    return hull.vertices


def _family_key(p, q, r):
    return tuple(sorted([_snap_key(p), _snap_key(q), _snap_key(r)]))


def t_operator(gamma: SegmentComplex, delta) -> SegmentComplex:
    """One application of the cross-segment operator.

    For every point shared by two segments, adds the family of cross
    segments between them.  In the plane only pairs of extreme far endpoints
    are kept: their triangles fan out over the convex hull of the point and
    all far endpoints, which is also the union of every pair's triangle.
    """
    fams = [gamma.families]
    seen = {_family_key(*f) for f in gamma.families}
    for p, fars in _incident(gamma, delta):
        cand = _extreme(fars) if gamma.dim == 2 else dedup(fars, 1e-7)
        for q, r in itertools.combinations(cand, 2):
            key = _family_key(p, q, r)
            if key in seen:
                continue
            seen.add(key)
            fams.append(np.array([[p, q, r]]))
    return SegmentComplex(gamma.segments.copy(), np.concatenate(fams), dict(gamma.flags))


class _Coverage:
    """Occupancy grid of cell delta/2 over a box; 'covered' means within one cell."""

    def __init__(self, lo, hi, delta):
        self.cell = 0.5 * delta
        self.lo = np.asarray(lo, dtype=float) - 2 * self.cell
        shape = np.ceil((np.asarray(hi) - self.lo) / self.cell).astype(int) + 3
        self.occ = np.zeros(tuple(shape), dtype=bool)
        self.near = self.occ.copy()

    def _idx(self, pts):
        idx = np.floor((pts - self.lo) / self.cell).astype(np.int64)
        return tuple(np.clip(idx, 0, np.array(self.occ.shape) - 1).T)

    def add(self, pts):
        self.occ[self._idx(pts)] = True
        self.near = ndimage.maximum_filter(self.occ, size=3, mode="constant")

    def add_local(self, pts):
        idx = self._idx(pts)
        self.occ[idx] = True
        # mark the 3^N neighbourhood directly
        for off in itertools.product((-1, 0, 1), repeat=self.occ.ndim):
            j = tuple(np.clip(i + o, 0, n - 1) for i, o, n in zip(idx, off, self.occ.shape))
            self.near[j] = True

    def covered(self, pts):
        return self.near[self._idx(pts)]


def _new_families(cov: _Coverage, fams, delta):
    """Greedy filter: keep families whose triangle reaches beyond the coverage."""
    if len(fams) == 0:
        return fams
    a, b, c = fams[:, 0], fams[:, 1], fams[:, 2]
    longest = np.max(np.stack([np.linalg.norm(b - a, axis=1), np.linalg.norm(c - a, axis=1),
                               np.linalg.norm(c - b, axis=1)]), axis=0)
    n = np.maximum(1, np.ceil(longest / delta).astype(np.int64))
    outside = np.zeros(len(fams), dtype=bool)
    for k in np.unique(n):
        sel = np.nonzero(n == k)[0]
        per = (k + 1) * (k + 2) // 2
        for s in range(0, len(sel), max(1, 200000 // per)):
            part = sel[s:s + max(1, 200000 // per)]
            pts = _triangle_samples(fams[part], delta)
            outside[part] = ~np.all(cov.covered(pts).reshape(len(part), per), axis=1)
    keep = []
    # largest first so near-duplicates are absorbed
    for i in sorted(np.nonzero(outside)[0], key=lambda i: -longest[i]):
        pts = _triangle_samples(fams[i:i + 1], delta)
        if not np.all(cov.covered(pts)):
            keep.append(i)
            cov.add_local(pts)
    return fams[np.array(sorted(keep), dtype=np.int64)]


def t_closure(gamma: SegmentComplex, k_max=10, delta=0.01):
    """Apply :func:`t_operator` until the sample stops growing by more than 2 delta.

    New families whose triangle stays within 2 delta of the current sample
    are dropped after each round to keep the complex small.  Returns
    ``(complex, rounds, converged)`` where ``rounds`` counts the applications
    that still grew the sample.
    """
    if not gamma.is_connected():
        raise PreconditionError("segment complex is not polygonally connected")
    verts = gamma.vertices()
    cov = _Coverage(verts.min(axis=0), verts.max(axis=0), delta)
    cov.add(gamma.sample(delta))
    cur = gamma
    for k in range(1, k_max + 1):
        nxt = t_operator(cur, delta)
        fresh = _new_families(cov, nxt.families[len(cur.families):], delta)
        if len(fresh) == 0:
            return cur, k - 1, True
        cur = SegmentComplex(cur.segments, np.concatenate([cur.families, fresh]), dict(cur.flags))
    return cur, k_max, False


# --------------------------------------------------------------------------
# graph of obstacle components


def primitives_overlap(p, q):
    if isinstance(p, Ball) and isinstance(q, Ball):
        return np.linalg.norm(np.subtract(p.center, q.center)) <= p.radius + q.radius
    if isinstance(p, Box) and isinstance(q, Box):
        return bool(np.all(np.asarray(p.lo) <= q.hi) and np.all(np.asarray(q.lo) <= p.hi))
    ball, box = (p, q) if isinstance(p, Ball) else (q, p)
    return -box.psi(np.asarray(ball.center, dtype=float)) <= ball.radius


def _center(prim):
    if isinstance(prim, Ball):
        return np.asarray(prim.center, dtype=float)
    return 0.5 * (np.asarray(prim.lo, dtype=float) + np.asarray(prim.hi, dtype=float))


def _interior_points(prim, n, dim):
    """Centre plus points on a slightly shrunken copy of the primitive's boundary."""
    c = _center(prim)
    if n <= 1:
        return c[None]
    if dim == 2:
        th = 2 * np.pi * np.arange(n - 1) / (n - 1)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        i = np.arange(n - 1) + 0.5
        z = 1 - 2 * i / (n - 1)
        r = np.sqrt(1 - z * z)
        ph = np.pi * (3 - math.sqrt(5)) * i
        dirs = np.stack([r * np.cos(ph), r * np.sin(ph), z], axis=1)
    if isinstance(prim, Ball):
        pts = c + 0.999 * prim.radius * dirs
    else:
        half = 0.5 * (np.asarray(prim.hi) - np.asarray(prim.lo))
        scale = np.min(half / np.maximum(np.abs(dirs), 1e-300), axis=1)
        pts = c + 0.999 * scale[:, None] * dirs
    return np.concatenate([c[None], pts])


@dataclass
class GraphG:
    components: list
    edges: list
    connected: bool
    dim: int = 2

    def to_dot(self):
        lines = ["graph G {"]
        for i, comp in enumerate(self.components):
            lines.append(f'  c{i} [label="component {i}: primitives {comp}"];')
        for i, j, (x, y) in self.edges:
            w = ", ".join(f"{v:.4g}" for v in np.concatenate([x, y]))
            lines.append(f'  c{i} -- c{j} [label="{w}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def obstacle_components(spec: ObstacleSpec):
    n = len(spec.primitives)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(n), 2):
        if primitives_overlap(spec.primitives[i], spec.primitives[j]):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def segment_positive(u0: GridField, x, y, spacing=None):
    spacing = spacing or 0.5 * u0.h
    pts = _sample_segments(np.asarray(x, float)[None], np.asarray(y, float)[None], spacing)
    return bool(np.all(interpolate(u0, pts) > 0))


def build_graph_G(spec: ObstacleSpec, u0_field: GridField, samples_per_pair=64) -> GraphG:
    """Components of K joined when some segment between them keeps u0 > 0."""
    if spec.is_empty:
        raise EmptySetError("obstacle is empty")
    comps = obstacle_components(spec)
    per_prim = max(1, int(math.ceil(math.sqrt(samples_per_pair))))
    cand = []
    for comp in comps:
        cand.append(np.concatenate([_interior_points(spec.primitives[k], per_prim, spec.dim) for k in comp]))
    edges = []
    for i, j in itertools.combinations(range(len(comps)), 2):
        xs, ys = cand[i], cand[j]
        d = np.linalg.norm(xs[:, None] - ys[None], axis=2)
        order = np.argsort(d, axis=None, kind="stable")[:samples_per_pair]
        for flat in order:
            a, b = np.unravel_index(flat, d.shape)
            if segment_positive(u0_field, xs[a], ys[b]):
                edges.append((i, j, (xs[a], ys[b])))
                break
    parent = list(range(len(comps)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j, _ in edges:
        parent[find(j)] = find(i)
    connected = len({find(i) for i in range(len(comps))}) <= 1
    return GraphG(comps, edges, connected, spec.dim)


def build_L(g: GraphG, spec: ObstacleSpec, u0_field: GridField = None) -> SegmentComplex:
    """Witness segments of G plus connectors inside each component."""
    segs = []

    def owner(p):
        vals = [prim.psi(np.asarray(p)) for prim in spec.primitives]
        return int(np.argmax(vals))

    for comp in g.components:
        # centre-to-centre links along overlapping pairs (each stays in the two primitives)
        for a, b in itertools.combinations(comp, 2):
            if primitives_overlap(spec.primitives[a], spec.primitives[b]):
                ca, cb = _center(spec.primitives[a]), _center(spec.primitives[b])
                if np.linalg.norm(ca - cb) > 1e-12:
                    segs.append((ca, cb))
    for _, _, (x, y) in g.edges:
        segs.append((x, y))
        for p in (x, y):
            c = _center(spec.primitives[owner(p)])
            if np.linalg.norm(c - p) > 1e-12:
                segs.append((p, c))
    arr = np.array(segs, dtype=float).reshape(-1, 2, spec.dim)
    cx = SegmentComplex(arr)
    touched = {i for e in g.edges for i in e[:2]}
    # single-primitive components without a witness have no segment at all
    lonely = sum(1 for i, comp in enumerate(g.components) if i not in touched and len(comp) == 1)
    cx.flags["pieces"] = (len(cx.pieces()) if len(arr) else 0) + lonely
    cx.flags["connected"] = g.connected
    return cx
