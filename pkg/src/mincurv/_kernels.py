"""Compiled per-node loop for the planar game round with direction refinement.

Same arithmetic as the array implementation in :mod:`mincurv.game`; fusing
the direction scan and the root search per node keeps everything in cache.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _bilinear(u, far, fx, fy):
    nx, ny = u.shape
    if fx < -1e-12 or fx > nx - 1 + 1e-12 or fy < -1e-12 or fy > ny - 1 + 1e-12:
        return far
    i0 = min(max(int(math.floor(fx)), 0), nx - 2)
    j0 = min(max(int(math.floor(fy)), 0), ny - 2)
    s = min(max(fx - i0, 0.0), 1.0)
    t = min(max(fy - j0, 0.0), 1.0)
    return ((1.0 - s) * (1.0 - t) * u[i0, j0] + s * (1.0 - t) * u[i0 + 1, j0]
            + (1.0 - s) * t * u[i0, j0 + 1] + s * t * u[i0 + 1, j0 + 1])


@njit(cache=True)
def _fixed(u, far, i, j, di, si, dj, sj, fx, fy):
    # offset with precomputed integer part and weights; general path near the edges
    nx, ny = u.shape
    i0 = i + di
    j0 = j + dj
    if i0 < 0 or j0 < 0 or i0 > nx - 2 or j0 > ny - 2:
        return _bilinear(u, far, i + fx, j + fy)
    return ((1.0 - si) * (1.0 - sj) * u[i0, j0] + si * (1.0 - sj) * u[i0 + 1, j0]
            + (1.0 - si) * sj * u[i0, j0 + 1] + si * sj * u[i0 + 1, j0 + 1])


@njit(cache=True)
def _ends(u, far, i, j, r, ang):
    dx = r * math.cos(ang)
    dy = r * math.sin(ang)
    return _bilinear(u, far, i + dx, j + dy), _bilinear(u, far, i - dx, j - dy)


@njit(cache=True)
def planar_round(u, far, r, angles, maximize, iters, active):
    """Per node: best over directions of min (maximize) or max (not) of the two ends.

    ``r`` is the step length in index units; ``angles`` are increasing in
    [0, pi) with spacing pi / len(angles).  Nodes with ``active`` false copy
    their value (the caller guarantees every read there returns it).
    """
    nx, ny = u.shape
    m = angles.shape[0]
    width = math.pi / m
    out = np.empty((nx, ny))
    ca = np.cos(angles) * r
    sa = np.sin(angles) * r
    # integer parts and fractions of +-(ca, sa), shared by every node
    dip = np.floor(ca).astype(np.int64)
    djp = np.floor(sa).astype(np.int64)
    dim_ = np.floor(-ca).astype(np.int64)
    djm = np.floor(-sa).astype(np.int64)
    sip = ca - dip
    sjp = sa - djp
    sim = -ca - dim_
    sjm = -sa - djm
    for i in range(nx):
        for j in range(ny):
            if not active[i, j]:
                out[i, j] = u[i, j]
                continue
            best = -np.inf if maximize else np.inf
            bscore = best
            ba = 0.0
            bfa = 0.0
            bfb = 0.0
            found = False
            p0 = _fixed(u, far, i, j, dip[0], sip[0], djp[0], sjp[0], ca[0], sa[0])
            q0 = _fixed(u, far, i, j, dim_[0], sim[0], djm[0], sjm[0], -ca[0], -sa[0])
            pp, pq = p0, q0
            for k in range(m + 1):
                if k < m:
                    if k == 0:
                        p, q = p0, q0
                    else:
                        p = _fixed(u, far, i, j, dip[k], sip[k], djp[k], sjp[k], ca[k], sa[k])
                        q = _fixed(u, far, i, j, dim_[k], sim[k], djm[k], sjm[k], -ca[k], -sa[k])
                else:
                    # wrap: the first direction reversed
                    p, q = q0, p0
                val = min(p, q) if maximize else max(p, q)
                if k < m:
                    if (maximize and val > best) or (not maximize and val < best):
                        best = val
                if k > 0:
                    f0 = pp - pq
                    f1 = p - q
                    if np.sign(f0) != np.sign(f1):
                        v0 = min(pp, pq) if maximize else max(pp, pq)
                        sc = max(v0, val) if maximize else min(v0, val)
                        if (not found) or (maximize and sc > bscore) or (not maximize and sc < bscore):
                            found = True
                            bscore = sc
                            ba = angles[k - 1]
                            bfa = f0
                            bfb = f1
                pp, pq = p, q
            if found:
                a = ba
                b = ba + width
                fa = bfa
                fb = bfb
                last = 0
                for _ in range(iters):
                    den = fb - fa
                    if den != 0.0:
                        c = b - fb * (b - a) / den
                    else:
                        c = 0.5 * (a + b)
                    c = min(max(c, a), b)
                    p, q = _ends(u, far, i, j, r, c)
                    cand = min(p, q) if maximize else max(p, q)
                    if (maximize and cand > best) or (not maximize and cand < best):
                        best = cand
                    fc = p - q
                    if np.sign(fc) == np.sign(fa):
                        if last == 1:
                            fb *= 0.5
                        a = c
                        fa = fc
                        last = 1
                    else:
                        if last == 2:
                            fa *= 0.5
                        b = c
                        fb = fc
                        last = 2
            out[i, j] = best
    return out


@njit(cache=True)
def _householder_tangents(g0, g1, g2, norm):
    # columns 2 and 3 of I - 2 w w^T / |w|^2 with w = u + sign(u0) e1
    u0 = g0 / norm
    u1 = g1 / norm
    u2 = g2 / norm
    sgn = 1.0 if u0 >= 0 else -1.0
    w0 = u0 + sgn
    ww = w0 * w0 + u1 * u1 + u2 * u2
    f = 2.0 / ww
    a0 = -f * w0 * u1
    a1 = 1.0 - f * u1 * u1
    a2 = -f * u2 * u1
    b0 = -f * w0 * u2
    b1 = -f * u1 * u2
    b2 = 1.0 - f * u2 * u2
    return a0, a1, a2, b0, b1, b2


@njit(cache=True)
def _top_eig_sym3(h00, h01, h02, h11, h12, h22):
    # closed form for symmetric 3x3 (trigonometric solution of the characteristic cubic)
    off = h01 * h01 + h02 * h02 + h12 * h12
    if off == 0.0:
        return max(h00, max(h11, h22))
    q = (h00 + h11 + h22) / 3.0
    a = h00 - q
    b = h11 - q
    c = h22 - q
    p = math.sqrt((a * a + b * b + c * c + 2.0 * off) / 6.0)
    if p == 0.0:
        return q
    det = (a * (b * c - h12 * h12) - h01 * (h01 * c - h12 * h02) + h02 * (h01 * h12 - b * h02)) / (p * p * p)
    r = min(max(0.5 * det, -1.0), 1.0)
    phi = math.acos(r) / 3.0
    return q + 2.0 * p * math.cos(phi)


@njit(cache=True)
def _flat_mask2(u):
    """True where the 3x3 neighbourhood holds a single value (interior nodes)."""
    nx, ny = u.shape
    flat = np.zeros((nx, ny), dtype=np.bool_)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            c = u[i, j]
            ok = True
            for a in range(-1, 2):
                for b in range(-1, 2):
                    if u[i + a, j + b] != c:
                        ok = False
                        break
                if not ok:
                    break
            flat[i, j] = ok
    return flat


@njit(cache=True)
def _flat_mask3(u):
    """True where the 3x3x3 neighbourhood holds a single value (interior nodes).

    Separable: a node is flat iff its 3-run along k is flat for the nine
    (i, j) neighbours and all nine share its value.
    """
    nx, ny, nz = u.shape
    run = np.zeros((nx, ny, nz), dtype=np.bool_)
    for i in range(nx):
        for j in range(ny):
            for k in range(1, nz - 1):
                c = u[i, j, k]
                run[i, j, k] = u[i, j, k - 1] == c and u[i, j, k + 1] == c
    flat = np.zeros((nx, ny, nz), dtype=np.bool_)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            for k in range(1, nz - 1):
                if not run[i, j, k]:
                    continue
                c = u[i, j, k]
                ok = True
                for a in range(-1, 2):
                    for b in range(-1, 2):
                        if not run[i + a, j + b, k] or u[i + a, j + b, k] != c:
                            ok = False
                            break
                    if not ok:
                        break
                flat[i, j, k] = ok
    return flat


@njit(cache=True)
def pde_round2(u, psi, far, h, dt, minimal, thr, skip_flat):
    nx, ny = u.shape
    out = np.empty_like(u)
    flat = _flat_mask2(u) if skip_flat else np.zeros((1, 1), dtype=np.bool_)
    ih = 1.0 / (2.0 * h)
    ih2 = 1.0 / (h * h)
    i4 = 1.0 / (4.0 * h * h)
    for i in range(nx):
        for j in range(ny):
            if i == 0 or j == 0 or i == nx - 1 or j == ny - 1:
                out[i, j] = far
                continue
            c = u[i, j]
            if skip_flat and flat[i, j]:
                out[i, j] = max(psi[i, j], c)
                continue
            g0 = (u[i + 1, j] - u[i - 1, j]) * ih
            g1 = (u[i, j + 1] - u[i, j - 1]) * ih
            h00 = (u[i + 1, j] - 2.0 * c + u[i - 1, j]) * ih2
            h11 = (u[i, j + 1] - 2.0 * c + u[i, j - 1]) * ih2
            h01 = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) * i4
            norm = math.sqrt(g0 * g0 + g1 * g1)
            if norm <= thr:
                if minimal:
                    mid = 0.5 * (h00 + h11)
                    rad = math.sqrt((0.5 * (h00 - h11)) ** 2 + h01 * h01)
                    speed = -(mid + rad)
                else:
                    speed = -(h00 + h11)
            elif minimal:
                t0 = -g1 / norm
                t1 = g0 / norm
                speed = -(t0 * t0 * h00 + 2.0 * t0 * t1 * h01 + t1 * t1 * h11)
            else:
                pp = norm * norm
                speed = -((h00 + h11) - (g0 * g0 * h00 + 2.0 * g0 * g1 * h01 + g1 * g1 * h11) / pp)
            out[i, j] = max(psi[i, j], c - dt * speed)
    return out


@njit(cache=True)
def pde_round3(u, psi, far, h, dt, minimal, thr, skip_flat):
    nx, ny, nz = u.shape
    out = np.empty_like(u)
    flat = _flat_mask3(u) if skip_flat else np.zeros((1, 1, 1), dtype=np.bool_)
    ih = 1.0 / (2.0 * h)
    ih2 = 1.0 / (h * h)
    i4 = 1.0 / (4.0 * h * h)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if i == 0 or j == 0 or k == 0 or i == nx - 1 or j == ny - 1 or k == nz - 1:
                    out[i, j, k] = far
                    continue
                c = u[i, j, k]
                if skip_flat and flat[i, j, k]:
                    out[i, j, k] = max(psi[i, j, k], c)
                    continue
                g0 = (u[i + 1, j, k] - u[i - 1, j, k]) * ih
                g1 = (u[i, j + 1, k] - u[i, j - 1, k]) * ih
                g2 = (u[i, j, k + 1] - u[i, j, k - 1]) * ih
                h00 = (u[i + 1, j, k] - 2.0 * c + u[i - 1, j, k]) * ih2
                h11 = (u[i, j + 1, k] - 2.0 * c + u[i, j - 1, k]) * ih2
                h22 = (u[i, j, k + 1] - 2.0 * c + u[i, j, k - 1]) * ih2
                h01 = (u[i + 1, j + 1, k] - u[i + 1, j - 1, k] - u[i - 1, j + 1, k] + u[i - 1, j - 1, k]) * i4
                h02 = (u[i + 1, j, k + 1] - u[i + 1, j, k - 1] - u[i - 1, j, k + 1] + u[i - 1, j, k - 1]) * i4
                h12 = (u[i, j + 1, k + 1] - u[i, j + 1, k - 1] - u[i, j - 1, k + 1] + u[i, j - 1, k - 1]) * i4
                norm = math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
                if norm <= thr:
                    if minimal:
                        speed = -_top_eig_sym3(h00, h01, h02, h11, h12, h22)
                    else:
                        speed = -(h00 + h11 + h22)
                elif minimal:
                    a0, a1, a2, b0, b1, b2 = _householder_tangents(g0, g1, g2, norm)
                    # restricted 2x2 matrix [[A, B], [B, C]]
                    xa0 = h00 * a0 + h01 * a1 + h02 * a2
                    xa1 = h01 * a0 + h11 * a1 + h12 * a2
                    xa2 = h02 * a0 + h12 * a1 + h22 * a2
                    xb0 = h00 * b0 + h01 * b1 + h02 * b2
                    xb1 = h01 * b0 + h11 * b1 + h12 * b2
                    xb2 = h02 * b0 + h12 * b1 + h22 * b2
                    A = a0 * xa0 + a1 * xa1 + a2 * xa2
                    B = a0 * xb0 + a1 * xb1 + a2 * xb2
                    C = b0 * xb0 + b1 * xb1 + b2 * xb2
                    speed = -(0.5 * (A + C) + math.sqrt((0.5 * (A - C)) ** 2 + B * B))
                else:
                    pp = norm * norm
                    quad = (g0 * g0 * h00 + g1 * g1 * h11 + g2 * g2 * h22
                            + 2.0 * (g0 * g1 * h01 + g0 * g2 * h02 + g1 * g2 * h12))
                    speed = -((h00 + h11 + h22) - quad / pp)
                out[i, j, k] = max(psi[i, j, k], c - dt * speed)
    return out
