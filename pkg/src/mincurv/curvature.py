"""The minimal-curvature operator and its mean-curvature counterpart.

For a gradient ``p`` and a symmetric matrix ``X``::

    L(p, X) = inf { -<X v, v> : |v| = 1, v orthogonal to p }

which is minus the largest eigenvalue of ``X`` restricted to the hyperplane
orthogonal to ``p``.  When ``|p|`` is below the gradient threshold the
infimum runs over all unit vectors instead.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_GRAD_THRESHOLD = 1e-8


@dataclass(frozen=True)
class OperatorResult:
    value: float
    argmin_direction: np.ndarray
    degenerate_p: bool


def sym(X):
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def tangent_basis(p):
    """Orthonormal basis of the hyperplane orthogonal to each ``p``.

    Built from the Householder reflector sending ``p/|p|`` to ``-+e1``; the
    remaining columns span the orthogonal complement.  Shape ``(..., N, N-1)``.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    u = p / np.linalg.norm(p, axis=-1, keepdims=True)
    sign = np.where(u[..., :1] >= 0, 1.0, -1.0)
    w = u.copy()
    w[..., :1] += sign
    ww = np.sum(w * w, axis=-1)[..., None, None]
    refl = np.eye(n) - 2.0 * w[..., :, None] * w[..., None, :] / ww
    return refl[..., :, 1:]


def _top_eig_2x2(a, b, c):
    """Largest eigenvalue and unit eigenvector of [[a, b], [b, c]], vectorized."""
    mid = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
    lam = mid + rad
    v1 = np.stack([lam - c, b], axis=-1)
    v2 = np.stack([b, lam - a], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    use1 = n1 >= n2
    v = np.where(use1[..., None], v1, v2)
    nv = np.where(use1, n1, n2)
    # isotropic case: any direction is an eigenvector
    iso = nv <= 1e-300
    v = np.where(iso[..., None], np.array([1.0, 0.0]), v / np.where(iso, 1.0, nv)[..., None])
    return lam, v


def eval_L_batch(P, X, grad_threshold=DEFAULT_GRAD_THRESHOLD):
    """Vectorized operator evaluation.

    ``P`` has shape (..., N) and ``X`` (..., N, N).  Returns
    ``(values, directions, degenerate)``.
    """
    P = np.asarray(P, dtype=float)
    X = sym(X)
    n = P.shape[-1]
    lead = P.shape[:-1]
    P = P.reshape(-1, n)
    X = X.reshape(-1, n, n)
    m = len(P)
    values = np.empty(m)
    dirs = np.empty((m, n))
    norm = np.linalg.norm(P, axis=1)
    deg = norm <= grad_threshold
    ok = ~deg
    if ok.any():
        Po, Xo = P[ok], X[ok]
        if n == 2:
            t = np.stack([-Po[:, 1], Po[:, 0]], axis=1) / norm[ok][:, None]
            values[ok] = -np.einsum("ki,kij,kj->k", t, Xo, t)
            dirs[ok] = t
        elif n == 3:
            B = tangent_basis(Po)
            R = np.einsum("kia,kij,kjb->kab", B, Xo, B)
            lam, e = _top_eig_2x2(R[:, 0, 0], R[:, 0, 1], R[:, 1, 1])
            values[ok] = -lam
            dirs[ok] = np.einsum("kia,ka->ki", B, e)
        else:
            B = tangent_basis(Po)
            R = np.einsum("kia,kij,kjb->kab", B, Xo, B)
            w, V = np.linalg.eigh(R)
            values[ok] = -w[:, -1]
            dirs[ok] = np.einsum("kia,ka->ki", B, V[:, :, -1])
    if deg.any():
        w, V = np.linalg.eigh(X[deg])
        values[deg] = -w[:, -1]
        dirs[deg] = V[:, :, -1]
    return values.reshape(lead), dirs.reshape(lead + (n,)), deg.reshape(lead)


def eval_L(p, X, grad_threshold=DEFAULT_GRAD_THRESHOLD) -> OperatorResult:
    if not grad_threshold > 0:
        raise ValueError("grad_threshold must be positive")
    v, d, deg = eval_L_batch(np.asarray(p, dtype=float)[None], np.asarray(X, dtype=float)[None], grad_threshold)
    return OperatorResult(float(v[0]), d[0], bool(deg[0]))


def mean_curvature_batch(P, X, grad_threshold=DEFAULT_GRAD_THRESHOLD):
    """-trace((I - p p^T/|p|^2) X), or -trace(X) where the gradient vanishes."""
    P = np.asarray(P, dtype=float)
    X = sym(X)
    tr = np.trace(X, axis1=-2, axis2=-1)
    pp = np.sum(P * P, axis=-1)
    deg = np.sqrt(pp) <= grad_threshold
    normal = np.einsum("...i,...ij,...j->...", P, X, P) / np.where(deg, 1.0, pp)
    return np.where(deg, -tr, -(tr - normal))


def mean_curvature_op(p, X, grad_threshold=DEFAULT_GRAD_THRESHOLD) -> float:
    return float(mean_curvature_batch(np.asarray(p, float)[None], np.asarray(X, float)[None], grad_threshold)[0])


def check_geometric(p, X, alpha, sigma, grad_threshold=DEFAULT_GRAD_THRESHOLD) -> bool:
    """L(alpha p, alpha X + sigma p p^T) == alpha L(p, X)."""
    p = np.asarray(p, dtype=float)
    X = sym(X)
    base = alpha * eval_L(p, X, grad_threshold).value
    scaled = eval_L(alpha * p, alpha * X + sigma * np.outer(p, p), grad_threshold).value
    return abs(scaled - base) <= 1e-10 * (1.0 + abs(base))


def check_elliptic(p, X, Y, grad_threshold=DEFAULT_GRAD_THRESHOLD) -> bool:
    """X <= Y implies L(p, Y) <= L(p, X)."""
    return eval_L(p, Y, grad_threshold).value <= eval_L(p, X, grad_threshold).value + 1e-12


def check_bounds(p, X, grad_threshold=DEFAULT_GRAD_THRESHOLD) -> bool:
    """lambda_min(-X) <= L(p, X) <= lambda_max(-X)."""
    w = np.linalg.eigvalsh(-sym(X))
    val = eval_L(p, X, grad_threshold).value
    return w[0] - 1e-12 <= val <= w[-1] + 1e-12


def sampled_infimum(p, X, n_samples, rng):
    """Brute-force min of -<Xv, v> over random unit v orthogonal to p."""
    p = np.asarray(p, dtype=float)
    X = sym(X)
    n = len(p)
    v = rng.standard_normal((n_samples, n))
    pn = p / np.linalg.norm(p)
    v -= np.outer(v @ pn, pn)
    # second projection removes the cancellation left by near-parallel draws
    v -= np.outer(v @ pn, pn)
    nv = np.linalg.norm(v, axis=1)
    keep = nv > 1e-6
    v = v[keep] / nv[keep, None]
    return float(np.min(-np.einsum("ki,ij,kj->k", v, X, v)))
