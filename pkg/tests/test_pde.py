import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mincurv.errors import StabilityError
from mincurv.game import GameParams, run_game
from mincurv.grid import GridField, positivity_set
from mincurv.obstacle import NO_OBSTACLE
from mincurv.pde import PdeParams, active_nodes, check_cfl, max_stable_dt, pde_step, run_pde


def box_field(fn, h=0.05, L=1.0, far=-10.0, dim=2):
    return GridField.from_box(fn, (-L,) * dim, (L,) * dim, h, far)


def no_obstacle(f):
    return f.with_values(np.full(f.dims, NO_OBSTACLE))


def inner(f):
    return tuple(slice(1, n - 1) for n in f.dims)


def test_cfl_bound_and_refusal():
    assert max_stable_dt(0.1, 2, 1.0) == pytest.approx(0.005)
    assert max_stable_dt(0.1, 3, 0.9) == pytest.approx(0.9 * 0.01 / 4)
    p = PdeParams(0.01, 1.0)
    with pytest.raises(StabilityError):
        check_cfl(p, 0.1, 2)
    f = box_field(lambda x: x[..., 0], h=0.1)
    with pytest.raises(StabilityError):
        pde_step(f, no_obstacle(f), p)
    for bad in (dict(dt=0.0, t_end=1.0), dict(dt=1e-3, t_end=1.0, cfl_safety=1.5),
                dict(dt=1e-3, t_end=1.0, operator="max")):
        with pytest.raises(ValueError):
            PdeParams(**bad)
    with pytest.raises(ValueError):
        run_pde(f, no_obstacle(f), PdeParams.from_cfl(0.1, 2, 0.0))


@pytest.mark.parametrize("compiled", [True, False])
@pytest.mark.parametrize("dim", [2, 3])
def test_affine_is_fixed(compiled, dim):
    a = np.array([0.4, -0.7, 0.2])[:dim]
    f = box_field(lambda x: x @ a + 0.1, h=0.1, dim=dim)
    new = pde_step(f, no_obstacle(f), PdeParams.from_cfl(0.1, dim, 1.0, compiled=compiled))
    sl = inner(f)
    assert np.max(np.abs(new.values[sl] - f.values[sl])) < 1e-13
    ring = np.ones(f.dims, bool)
    ring[sl] = False
    assert np.all(new.values[ring] == f.far_value)


def test_dominating_obstacle():
    f = box_field(lambda x: -np.sum(x**2, axis=-1))
    new = pde_step(f, f.with_values(np.full(f.dims, 5.0)), PdeParams.from_cfl(0.05, 2, 1.0))
    assert np.all(new.values[inner(f)] == 5.0)


def test_cone_radius_speed():
    h = 0.02
    f = box_field(lambda x: 1 - np.linalg.norm(x, axis=-1), h=h, L=1.5)
    p = PdeParams.from_cfl(h, 2, 1.0)
    u = f
    k = 200
    for _ in range(k):
        u = pde_step(u, no_obstacle(f), p)
    R0 = math.sqrt(positivity_set(f).count() * h * h / math.pi)
    R1 = math.sqrt(positivity_set(u).count() * h * h / math.pi)
    assert abs((R0 - R1) - k * p.dt / 1.0) <= 10 * h


def test_compiled_matches_numpy_with_obstacle():
    for dim, h in ((2, 0.05), (3, 0.1)):
        f = box_field(lambda x: np.clip(0.8 - np.linalg.norm(x * (1, 1.4, 1)[:dim], axis=-1), -0.3, 0.3),
                      h=h, far=-0.3, dim=dim)
        pos = f.positions()
        psi = f.with_values(0.2 - 3 * np.linalg.norm(pos - 0.3, axis=-1))
        for op in ("min", "mean"):
            for active in (False, True):
                p1 = PdeParams.from_cfl(h, dim, 1.0, operator=op, active_set=active, compiled=True)
                p2 = PdeParams.from_cfl(h, dim, 1.0, operator=op, active_set=active, compiled=False)
                a, b = f, f
                for _ in range(5):
                    a, b = pde_step(a, psi, p1), pde_step(b, psi, p2)
                assert np.max(np.abs(a.values - b.values)) < 1e-12
                assert np.all(a.values[inner(f)] >= psi.values[inner(f)])


def test_active_set_is_exact():
    f = box_field(lambda x: np.clip(0.6 - np.linalg.norm(x, axis=-1), -0.2, 0.2), far=-0.2)
    psi = no_obstacle(f)
    a = b = f
    for _ in range(20):
        a = pde_step(a, psi, PdeParams.from_cfl(f.h, 2, 1.0, active_set=True))
        b = pde_step(b, psi, PdeParams.from_cfl(f.h, 2, 1.0, active_set=False))
    assert np.array_equal(a.values, b.values)
    m = active_nodes(f.values)
    assert not m[0, 0] and m[np.unravel_index(np.argmin(np.abs(f.values)), f.dims)]


def _smooth_pair(rng, dim, h):
    c = rng.normal(size=(4, dim)) * 0.3
    w = rng.uniform(0.5, 2.0, 4)
    base = lambda x: sum(wi * np.exp(-np.sum((x - ci) ** 2, axis=-1) / 0.3) for wi, ci in zip(w, c)) - 0.5
    u = box_field(base, h=h, dim=dim)
    bump_c = rng.normal(size=dim) * 0.3
    amp = rng.uniform(0.0, 0.5)
    v = u.with_values(u.values + amp * np.exp(-np.sum((u.positions() - bump_c) ** 2, axis=-1) / 0.2))
    return u, v


def test_single_step_comparison_random_pairs():
    rng = np.random.default_rng(11)
    worst = 0.0
    for trial in range(100):
        dim = 2 if trial % 4 else 3
        u, v = _smooth_pair(rng, dim, 0.1)
        psi = no_obstacle(u)
        p = PdeParams.from_cfl(0.1, dim, 1.0)
        worst = max(worst, np.max(pde_step(u, psi, p).values - pde_step(v, psi, p).values))
    assert worst <= 1e-12


def test_max_principle_radial():
    for dim in (2, 3):
        f = box_field(lambda x: np.cos(2 * np.linalg.norm(x, axis=-1)) * np.exp(-np.sum(x**2, axis=-1)),
                      h=0.1, L=1.2, far=-1.0, dim=dim)
        new = pde_step(f, no_obstacle(f), PdeParams.from_cfl(0.1, dim, 1.0))
        sl = inner(f)
        assert new.values[sl].max() <= f.values[sl].max() + 1e-12
        assert new.values[sl].min() >= f.values.min() - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_stays_above_obstacle(seed):
    rng = np.random.default_rng(seed)
    f = box_field(lambda x: 0.5 - np.sum(x**2, axis=-1), h=0.1)
    psi = f.with_values(rng.normal(size=f.dims) * 0.3)
    u = f
    for _ in range(3):
        u = pde_step(u, psi, PdeParams.from_cfl(0.1, 2, 1.0))
        assert np.all(u.values[inner(f)] >= psi.values[inner(f)])


def test_run_pde_snapshots_and_stop():
    f = box_field(lambda x: 0.5 - np.sum(x**2, axis=-1), h=0.1)
    p = PdeParams(0.004, 0.1)
    snaps = run_pde(f, no_obstacle(f), p, snapshot_every=10)
    assert [round(t, 6) for t, _ in snaps] == [0.0, 0.04, 0.08, 0.1]
    snaps = run_pde(f, no_obstacle(f), p, callback=lambda k, t, u: k < 4)
    assert len(snaps) == 2 and snaps[-1][0] == pytest.approx(0.016)


def test_game_pde_cross_validation():
    h, eps, T = 0.02, 0.1, 0.25
    f = box_field(lambda x: np.clip(1 - np.linalg.norm(x, axis=-1), -0.25, 0.25), h=h, L=1.4, far=-0.25)
    psi = no_obstacle(f)
    game = run_game(f, psi, GameParams.for_time(eps, T, refine=True))[-1][1]
    pde = run_pde(f, psi, PdeParams.from_cfl(h, 2, T))[-1][1]
    assert np.max(np.abs(game.values - pde.values)) <= 5 * (h + eps)
    Rg = math.sqrt(positivity_set(game).count() * h * h / math.pi)
    Rp = math.sqrt(positivity_set(pde).count() * h * h / math.pi)
    assert abs(Rg - Rp) <= 2 * (h + eps**2)
