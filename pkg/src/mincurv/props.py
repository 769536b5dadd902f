"""Seeded random sweeps of the operator and round-map properties."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import check_bounds, check_elliptic, check_geometric, eval_L, mean_curvature_op, sampled_infimum
from .game import GameParams, direction_set, dpp_step, play_concentric_carol, play_concentric_paul
from .grid import GridField

BRUTE_TRIALS = 200
BRUTE_SAMPLES = 100_000
BRUTE_TOL = 1e-3
DPP_PAIRS = 100


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    failures: int = 0
    worst: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.failures == 0 and self.trials > 0

    def record(self, ok, violation=0.0, note=None):
        self.trials += 1
        if not ok:
            self.failures += 1
            if note and len(self.notes) < 5:
                self.notes.append(note)
        self.worst = max(self.worst, float(violation))

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.trials - self.failures}/{self.trials} (worst {self.worst:.3g})"


def random_pair(rng, dim=None, zero_rate=0.1):
    """Random (p, X); a fraction of draws has p = 0."""
    n = dim or int(rng.integers(2, 4))
    p = np.zeros(n) if rng.random() < zero_rate else rng.standard_normal(n)
    A = rng.standard_normal((n, n))
    return p, 0.5 * (A + A.T)


def operator_suites(trials, rng):
    bounds, ellip, geo, eq2, brute = (SuiteResult(n) for n in
                                      ("operator bounds", "operator ellipticity", "operator geometric",
                                       "operator planar equals mean", "operator vs brute force"))
    for _ in range(trials):
        p, X = random_pair(rng)
        bounds.record(check_bounds(p, X), note=(p.tolist(), X.tolist()))
        B = rng.standard_normal((len(p), len(p)))
        ellip.record(check_elliptic(p, X, X + B @ B.T), note=(p.tolist(), X.tolist()))
        alpha = float(rng.uniform(0.1, 10.0))
        sigma = float(rng.normal(0.0, 3.0))
        geo.record(check_geometric(p, X, alpha, sigma), note=(p.tolist(), alpha, sigma))
        p2, X2 = random_pair(rng, 2, zero_rate=0.0)
        d = abs(eval_L(p2, X2).value - mean_curvature_op(p2, X2))
        eq2.record(d <= 1e-12, d)
    for _ in range(min(BRUTE_TRIALS, trials)):
        p, X = random_pair(rng, zero_rate=0.0)
        val = eval_L(p, X).value
        s = sampled_infimum(p, X, BRUTE_SAMPLES, rng)
        brute.record(abs(val - s) <= BRUTE_TOL and val <= s + 1e-12, abs(val - s))
    return [bounds, ellip, geo, eq2, brute]


def _grid(n=41, h=0.05, far=-2.0):
    lo = -0.5 * h * (n - 1)
    return (lo, lo), h, (n, n), far


def _field(values, spec):
    origin, h, _, far = spec
    return GridField(np.array(origin), h, values, far)


def _inner(spec, reach):
    # nodes whose reads at distance reach stay inside the box
    origin, h, dims, _ = spec
    k = int(math.ceil(reach / h)) + 1
    m = np.zeros(dims, dtype=bool)
    m[k:-k, k:-k] = True
    return m


def dpp_suites(trials, rng, eps=0.1, count=32):
    spec = _grid()
    origin, h, dims, far = spec
    params = GameParams(eps, 1, count, 2)
    dirs = direction_set(2, count)
    gap = dirs.angular_gap
    x = GridField(np.array(origin), h, np.zeros(dims), far).positions()
    dom, mono, bound, aff, quad = (SuiteResult(n) for n in
                                   ("dpp obstacle dominance", "dpp monotonicity", "dpp uniform bound",
                                    "dpp affine fixed point", "dpp quadratic decrease"))
    inner = _inner(spec, eps)
    for _ in range(min(DPP_PAIRS, trials)):
        u = rng.uniform(-1, 1, dims)
        v = u + rng.uniform(0, 0.5, dims) * (rng.random(dims) < 0.5)
        psi = _field(rng.uniform(-1.5, 0.5, dims), spec)
        nu = dpp_step(_field(u, spec), psi, params, dirs).values
        nv = dpp_step(_field(v, spec), psi, params, dirs).values
        mono.record(bool(np.all(nu <= nv)), float(np.max(nu - nv)))
        dom.record(bool(np.all(nu >= psi.values)), float(np.max(psi.values - nu)))
        # repeated rounds stay within the initial bounds
        lim = max(np.abs(u).max(), np.abs(psi.values).max(), abs(far))
        w = _field(u, spec)
        for _ in range(3):
            w = dpp_step(w, psi, params, dirs)
        bound.record(bool(np.abs(w.values).max() <= lim), float(np.abs(w.values).max() - lim))
    none = _field(np.full(dims, -1e9), spec)
    for _ in range(min(DPP_PAIRS, trials)):
        a = rng.normal(0, 1, 2)
        c = float(rng.normal())
        u = x @ a + c
        new = dpp_step(_field(u, spec), none, params, dirs).values
        err = np.abs(new - u)[inner].max()
        tol = np.linalg.norm(a) * eps * gap + 1e-12
        aff.record(err <= tol, err / tol)
        s = float(rng.uniform(0.2, 2.0))
        q = -s * np.einsum("...i,...i->...", x, x)
        new = dpp_step(_field(q, spec), none, params, dirs).values
        r = np.linalg.norm(x, axis=-1)
        expect = q - s * eps**2
        # direction gap plus multilinear error of a quadratic
        tol = s * (2 * eps * r * math.sin(0.5 * gap) + 0.5 * h * h) + 1e-12
        dev = np.abs(new - expect)
        quad.record(bool(np.all(dev[inner] <= tol[inner])), float(np.max(dev[inner] / tol[inner])))
    return [dom, mono, bound, aff, quad]


def strategy_suites(trials, rng, eps=0.1, rounds=50):
    paul, carol = SuiteResult("strategy concentric paul"), SuiteResult("strategy concentric carol")
    for _ in range(trials):
        dim = int(rng.integers(2, 4))
        z = rng.normal(0, 1, dim)
        x0 = z + rng.normal(0, 1, dim)
        params = GameParams(eps, rounds, None, dim)
        tr = play_concentric_paul(x0, z, params, rng.choice([-1, 1], size=rounds))
        d2 = np.sum((np.asarray(tr.positions[-1]) - z) ** 2)
        want = np.sum((x0 - z) ** 2) + rounds * eps**2
        paul.record(abs(d2 - want) <= 1e-12 * max(1.0, want), abs(d2 - want))
        vs = rng.normal(size=(rounds, dim))
        vs /= np.linalg.norm(vs, axis=1, keepdims=True)
        tr = play_concentric_carol(x0, z, params, vs)
        d2 = np.sum((np.asarray(tr.positions[-1]) - z) ** 2)
        carol.record(d2 >= want - 1e-12 * max(1.0, want), max(0.0, want - d2))
    return [paul, carol]


def run_props(trials=1000, seed=0):
    rng = np.random.default_rng(seed)
    return operator_suites(trials, rng) + dpp_suites(trials, rng) + strategy_suites(trials, rng)
