"""Classical convex hulls used as the reference oracle for hull constructions."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull


@dataclass
class Polytope:
    vertices: np.ndarray
    facets: list = field(default_factory=list)
    # each row (n, c) describes the half-space n.x <= c, n unit
    halfspaces: np.ndarray = None
    degenerate: bool = False
    affine_dim: int = 0

    def contains(self, pts, tol=1e-12):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.degenerate:
            return _contains_affine(self.vertices, pts, tol)
        n = self.halfspaces[:, :-1]
        c = self.halfspaces[:, -1]
        return np.all(pts @ n.T - c <= tol, axis=1)

    def signed_distance(self, pts):
        """Max half-space violation: <= 0 inside (not a Euclidean distance outside corners)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.max(pts @ self.halfspaces[:, :-1].T - self.halfspaces[:, -1], axis=1)


def _cross2(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points):
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        out = []
        for p in seq:
            # exact sign test: a tolerance here can drop a true vertex when the x-order
            # of nearly collinear points differs from their order along the line
            while len(out) >= 2 and _cross2(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])


def affine_dimension(points, tol=1e-9):
    pts = np.asarray(points, dtype=float)
    if len(pts) <= 1:
        return 0
    centered = pts - pts[0]
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(1.0, float(np.abs(pts).max()))
    return int(np.sum(sv > tol * scale))


def _contains_affine(vertices, pts, tol):
    # lower-dimensional hull: project onto the affine hull and test there
    base = vertices[0]
    _, sv, vt = np.linalg.svd(vertices - base)
    k = int(np.sum(sv > 1e-9 * max(1.0, np.abs(vertices).max())))
    if k == 0:
        return np.linalg.norm(pts - base, axis=1) <= tol
    basis = vt[:k]
    rel = pts - base
    resid = rel - (rel @ basis.T) @ basis
    off = np.linalg.norm(resid, axis=1) > tol
    coords = rel @ basis.T
    vcoords = (vertices - base) @ basis.T
    if k == 1:
        lo, hi = vcoords.min(), vcoords.max()
        ok = (coords[:, 0] >= lo - tol) & (coords[:, 0] <= hi + tol)
    else:
        sub = convex_hull(vcoords)
        ok = sub.contains(coords, tol)
    return ok & ~off


def convex_hull(points) -> Polytope:
    """Convex hull of a finite point set in 2 or 3 dimensions.

    Lower-dimensional inputs give a Polytope flagged ``degenerate`` with the
    affine-hull dimension recorded.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    n = pts.shape[1]
    adim = affine_dimension(pts)
    if adim < n:
        return Polytope(vertices=_extreme_points_degenerate(pts, adim), degenerate=True, affine_dim=adim)
    if n == 2:
        verts = monotone_chain(pts)
        m = len(verts)
        facets = [(i, (i + 1) % m) for i in range(m)]
        hs = []
        for i, j in facets:
            e = verts[j] - verts[i]
            nrm = np.array([e[1], -e[0]]) / np.hypot(e[0], e[1])
            hs.append(np.append(nrm, nrm @ verts[i]))
        return Polytope(verts, facets, np.array(hs), False, 2)
    qh = ConvexHull(pts)
    verts = pts[qh.vertices]
    remap = {int(v): i for i, v in enumerate(qh.vertices)}
    facets = [tuple(remap[int(v)] for v in simplex) for simplex in qh.simplices]
    eq = qh.equations  # n.x + d <= 0 inside
    hs = np.hstack([eq[:, :-1], -eq[:, -1:]])
    return Polytope(verts, facets, hs, False, n)


def _extreme_points_degenerate(pts, adim):
    if adim == 0:
        return pts[:1]
    base = pts[0]
    _, _, vt = np.linalg.svd(pts - base)
    coords = (pts - base) @ vt[:adim].T
    if adim == 1:
        return pts[[int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))]]
    verts2 = monotone_chain(coords)
    keep = [int(np.argmin(np.linalg.norm(coords - v, axis=1))) for v in verts2]
    return pts[keep]
