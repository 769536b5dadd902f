import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from mincurv.epsconvex import (SegmentComplex, build_graph_G, build_L, eps_convex_hull, eps_segment, ell_one_eps,
                               hull_via_ellN, is_eps_convex, overlap_radius, t_closure, t_operator)
from mincurv.errors import PreconditionError
from mincurv.grid import GridField
from mincurv.hull import convex_hull
from mincurv.obstacle import balls


def as_set(pts, nd=9):
    return {tuple(np.round(p, nd)) for p in np.asarray(pts)}


def brute_closure(A, eps, rounds=20):
    """Independent closure: plain Python loops over pairs until nothing new appears."""
    pts = [tuple(map(float, p)) for p in A]
    seen = {tuple(round(c, 9) for c in p) for p in pts}
    for _ in range(rounds):
        new = []
        for p, q in itertools.combinations(pts, 2):
            d = math.dist(p, q)
            m = round(d / eps)
            if m >= 2 and abs(d / eps - m) <= 1e-9 * max(1.0, d / eps):
                for k in range(1, m):
                    z = tuple(a + k / m * (b - a) for a, b in zip(p, q))
                    key = tuple(round(c, 9) for c in z)
                    if key not in seen:
                        seen.add(key)
                        new.append(z)
        if not new:
            return seen
        pts += new
    raise AssertionError("oracle did not close")


def test_eps_segment_examples():
    assert as_set(eps_segment((0, 0), (1, 0), 0.5)) == {(0, 0), (0.5, 0), (1, 0)}
    assert as_set(eps_segment((0, 0), (1, 0), 0.4)) == {(0, 0), (1, 0)}
    s = eps_segment((0, 0), (0.3, 0.4), 0.1)
    assert len(s) == 6
    u, w = s - s[0], s[-1] - s[0]
    assert np.allclose(u[:, 0] * w[1] - u[:, 1] * w[0], 0)
    assert np.allclose(np.diff(s, axis=0), (0.06, 0.08))
    with pytest.raises(ValueError):
        eps_segment((0, 0), (1, 0), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.floats(0.05, 2.0), st.floats(0, 2 * math.pi))
def test_eps_segment_is_eps_convex(m, eps, th):
    x = np.array([0.3, -0.2])
    y = x + m * eps * np.array([math.cos(th), math.sin(th)])
    s = eps_segment(x, y, eps)
    assert len(s) == m + 1
    assert is_eps_convex(s, eps)


def test_ell_one_eps_examples():
    assert len(ell_one_eps([(0, 0), (1, 0)], 0.5)) == 3
    tri = [(0, 0), (1, 0), (0.3, math.sqrt(2))]
    assert as_set(ell_one_eps(tri, 0.37)) == as_set(tri)


def test_ell_one_eps_square():
    got = ell_one_eps([(0, 0), (1, 0), (0, 1), (1, 1)], 0.5)
    # corners, edge midpoints and the centre
    assert len(got) == 9


def test_ell_one_eps_square_matches_pair_enumeration():
    sq = [(0, 0), (1, 0), (0, 1), (1, 1)]
    want = set(as_set(sq))
    for p, q in itertools.combinations(sq, 2):
        want |= as_set(eps_segment(p, q, 0.5))
    assert as_set(ell_one_eps(sq, 0.5)) == want


lattice = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=6, unique=True)


@settings(max_examples=40, deadline=None)
@given(lattice, lattice)
def test_ell_one_eps_monotone_extensive(a, b):
    A = np.array(a, float)
    B = np.array(sorted(set(a) | set(b)), float)
    la, lb = as_set(ell_one_eps(A, 1.0)), as_set(ell_one_eps(B, 1.0))
    assert as_set(A) <= la
    assert la <= lb


def test_eps_convex_hull_examples():
    r = eps_convex_hull([(0, 0), (1, 0)], 0.25)
    assert r.converged and r.iterations == 1 and len(r.points) == 5
    A = [(0, 0), (1, 0), (0.3, math.sqrt(2))]
    r = eps_convex_hull(A, 0.37)
    assert r.converged and r.iterations == 1 and as_set(r.points) == as_set(A)
    with pytest.raises(ValueError):
        eps_convex_hull(A, 0.1, max_iter=0)


def test_lattice_triangle_against_bruteforce():
    e = 0.3
    eps = math.sqrt(2) * e
    A = [(0, 0), (2 * e, 0), (0, 2 * e)]
    r = eps_convex_hull(A, eps)
    assert r.converged
    assert as_set(r.points) == brute_closure(A, eps)
    assert (round(e, 9), round(e, 9)) in as_set(r.points)
    assert is_eps_convex(r.points, eps)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=4, unique=True))
def test_eps_hull_matches_bruteforce_on_lattice(pts):
    A = np.array(pts, float)
    r = eps_convex_hull(A, 1.0, max_iter=30)
    want = brute_closure(A, 1.0, rounds=30)
    assert r.converged
    assert as_set(r.points) == want
    assert is_eps_convex(r.points, 1.0)


def test_eps_hull_unconverged_flag():
    r = eps_convex_hull([(0, 0), (4, 0), (0, 3)], 1.0, max_iter=1)
    assert not r.converged and r.iterations == 1
    assert len(r.points) > 3


def _hausdorff(a, b):
    return max(cKDTree(a).query(b)[0].max(), cKDTree(b).query(a)[0].max())


def _dense_simplex(V, n):
    """Barycentric samples of the simplex spanned by the rows of V."""
    k = len(V)
    grid = [c for c in itertools.product(range(n + 1), repeat=k - 1) if sum(c) <= n]
    w = np.array([[n - sum(c), *c] for c in grid], float) / n
    return w @ V


def test_hull_via_ellN_triangle():
    V = np.array([[0, 0], [1, 0], [0.3, 0.8]])
    delta = 0.05
    s = hull_via_ellN(V, delta)
    P = convex_hull(V)
    assert np.all(P.contains(s, tol=1e-9))
    assert _hausdorff(s, _dense_simplex(V, 200)) <= delta


def test_hull_via_ellN_two_points():
    s = hull_via_ellN([(0, 0), (1, 1)], 0.1)
    d = np.abs(s[:, 0] - s[:, 1])
    assert np.all(d < 1e-12)
    assert _hausdorff(s, np.linspace(0, 1, 500)[:, None] * (1, 1)) <= 0.1


def test_hull_via_ellN_tetrahedron():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    delta = 0.2
    s = hull_via_ellN(V, delta)
    assert np.all(convex_hull(V).contains(s, tol=1e-9))
    assert _hausdorff(s, _dense_simplex(V, 40)) <= delta


def test_t_operator_v_shape_and_single_segment():
    a, b, c = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.2, 0.9])
    delta = 0.02
    v = SegmentComplex(np.array([[a, b], [a, c]]))
    filled = t_operator(v, delta).sample(delta)
    assert _hausdorff(filled, _dense_simplex(np.array([a, b, c]), 200)) <= delta
    one = SegmentComplex(np.array([[a, b]]))
    assert len(t_operator(one, delta).families) == 0


def test_t_operator_triangle_sides():
    V = np.array([[0, 0], [1, 0], [0.4, 0.7]])
    sides = SegmentComplex(np.array([[V[0], V[1]], [V[1], V[2]], [V[2], V[0]]]))
    s = t_operator(sides, 0.02).sample(0.02)
    assert _hausdorff(s, _dense_simplex(V, 200)) <= 0.02


def test_t_closure_v_and_square():
    delta = 0.01
    v = SegmentComplex(np.array([[[0, 0], [1, 0]], [[0, 0], [0.2, 0.9]]], float))
    cx, k, ok = t_closure(v, 5, delta)
    assert ok and k == 1
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    ring = SegmentComplex(np.stack([sq, np.roll(sq, -1, axis=0)], axis=1))
    cx, k, ok = t_closure(ring, 5, delta)
    assert ok and k <= 2
    oracle = np.stack(np.meshgrid(np.linspace(0, 1, 201), np.linspace(0, 1, 201)), -1).reshape(-1, 2)
    assert _hausdorff(cx.sample(delta), oracle) <= 2 * delta


def test_t_closure_zigzag():
    delta = 0.01
    P = np.array([[0, 0], [1, 0.8], [1.6, 0.1], [2.4, 0.9]])
    zig = SegmentComplex(np.stack([P[:-1], P[1:]], axis=1))
    cx, k, ok = t_closure(zig, 3, delta)
    assert k <= 3
    hull = convex_hull(P)
    s = cx.sample(delta)
    assert np.all(hull.contains(s, tol=1e-9))
    lo, hi = P.min(0), P.max(0)
    g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 400), np.linspace(lo[1], hi[1], 200)), -1).reshape(-1, 2)
    assert _hausdorff(s, g[hull.contains(g)]) <= 2 * delta


def test_t_closure_contains_ell_one_of_vertices():
    P = np.array([[0, 0], [1, 0.3], [0.5, 1.2]])
    path = SegmentComplex(np.stack([P[:-1], P[1:]], axis=1))
    cx, _, _ = t_closure(path, 5, 0.02)
    s = cx.sample(0.02)
    seg = np.concatenate([np.linspace(p, q, 100) for p, q in itertools.combinations(P, 2)])
    assert cKDTree(s).query(seg)[0].max() <= 2 * 0.02


def test_t_closure_rejects_disconnected():
    two = SegmentComplex(np.array([[[0, 0], [1, 0]], [[0, 1], [1, 1]]], float))
    with pytest.raises(PreconditionError):
        t_closure(two, 3, 0.05)


def test_overlap_radius():
    assert overlap_radius(0.1, 2) == pytest.approx(math.sqrt(2) * 0.1)
    assert overlap_radius(0.1, 3) == pytest.approx(math.sqrt(6) * 0.1)
    assert all(overlap_radius(0.05, n) > 0 for n in range(2, 8))
    with pytest.raises(ValueError):
        overlap_radius(0.1, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.floats(0.05, 1.0), st.floats(0, 2 * math.pi), st.integers(2, 3))
def test_chain_of_balls_covers_segment(m, eps, th, N):
    a = np.zeros(N)
    d = np.zeros(N)
    d[0], d[1] = math.cos(th), math.sin(th)
    b = a + m * eps * d
    h = overlap_radius(eps, N)
    chain = eps_segment(a, b, eps)
    line = a + np.linspace(0, 1, 2000)[:, None] * (b - a)
    assert cKDTree(chain).query(line)[0].max() <= h


def capsule_u0(a, b, r, lo, hi, h=0.05):
    a, b = np.asarray(a, float), np.asarray(b, float)

    def f(x):
        t = np.clip((x - a) @ (b - a) / ((b - a) @ (b - a)), 0, 1)
        return r - np.linalg.norm(x - (a + t[..., None] * (b - a)), axis=-1)
    return GridField.from_box(f, lo, hi, h, -1.0)


def test_graph_two_balls_connected_3d():
    spec = balls([(-2, 0, 0), (2, 0, 0)], 1.0)
    u0 = capsule_u0((-2, 0, 0), (2, 0, 0), 1.5, (-3.6,) * 3, (3.6,) * 3, 0.1)
    g = build_graph_G(spec, u0)
    assert g.connected and len(g.edges) == 1
    assert "--" in g.to_dot()
    L = build_L(g, spec, u0)
    assert L.is_connected() and L.flags["pieces"] == 1


def test_graph_disjoint_omega():
    spec = balls([(-2, 0), (2, 0)], 1.0)
    u0 = GridField.from_box(lambda x: 1.2 - np.minimum(np.linalg.norm(x - (-2, 0), axis=-1),
                                                       np.linalg.norm(x - (2, 0), axis=-1)),
                            (-3.5, -1.5), (3.5, 1.5), 0.05, -1.0)
    g = build_graph_G(spec, u0)
    assert not g.connected and g.edges == []
    L = build_L(g, spec, u0)
    assert L.flags["pieces"] == 2 and not L.flags["connected"]


def test_graph_single_and_overlapping_component():
    spec = balls([(0, 0), (0.8, 0)], 0.5)
    u0 = capsule_u0((0, 0), (0.8, 0), 1.0, (-2, -2), (2, 2))
    g = build_graph_G(spec, u0)
    assert len(g.components) == 1 and g.connected and g.edges == []


def test_three_collinear_components_chain():
    spec = balls([(-3, 0), (0, 0), (3, 0)], 0.8)
    u0 = capsule_u0((-3, 0), (3, 0), 1.0, (-4.5, -2), (4.5, 2))
    g = build_graph_G(spec, u0)
    assert g.connected and len(g.edges) >= 2
    L = build_L(g, spec, u0)
    assert L.is_connected()
