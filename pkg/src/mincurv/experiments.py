"""Config-driven experiments and the metrics they report."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, game_snapshot_every, pde_snapshot_every
from .epsconvex import build_graph_G
from .errors import EmptySetError, PreconditionError
from .game import GameParams, alt_dpp_step, dpp_step, run_game
from .grid import BoolMask, GridSpec, dilate, hausdorff_distance, interpolate, positivity_set
from .hull import convex_hull
from .io import write_json, write_vtk
from .obstacle import Ball, Box, _primitive_boundary
from .pde import PdeParams, run_pde

UNIT_BALL = {2: math.pi, 3: 4.0 * math.pi / 3.0}
METRIC_HEADER = ("time", "volume", "radius", "dist_coK", "dist_coKeps")
PLATEAU_LAG = 0.1


@dataclass
class MetricSeries:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    # per-row columns outside the fixed header (e.g. neck radius)
    extra: dict = field(default_factory=dict)
    # (time, GridField) pairs behind the rows
    snapshots: list = field(default_factory=list)
    solver: str = "game"
    step_dt: float = 0.0

    def add(self, time, volume, radius, dist_coK=math.nan, dist_coKeps=math.nan, **extra):
        if self.rows and not time > self.rows[-1][0]:
            raise ValueError("times must be strictly increasing")
        self.rows.append(tuple(float(v) for v in (time, volume, radius, dist_coK, dist_coKeps)))
        for key, value in extra.items():
            self.extra.setdefault(key, []).append(float(value))

    def column(self, name):
        if name in self.extra:
            return np.asarray(self.extra[name])
        return np.array([r[METRIC_HEADER.index(name)] for r in self.rows])

    @property
    def times(self):
        return self.column("time")

    def to_csv(self, path):
        lines = [",".join(METRIC_HEADER)]
        lines += [",".join(repr(v) for v in row) for row in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")


def volume_and_radius(mask: BoolMask, h, dim):
    vol = mask.count() * h**dim
    return vol, (vol / UNIT_BALL[dim]) ** (1.0 / dim)


def _safe_hausdorff(a, b, h):
    try:
        return hausdorff_distance(a, b, h)
    except EmptySetError:
        return math.inf if (a.bits.any() or b.bits.any()) else 0.0


# --------------------------------------------------------------------------
# reference hull masks


def _segment_distance(x, a, b):
    ab = b - a
    t = np.clip(((x - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(x - (a + t[:, None] * ab), axis=1)


def _distance_to_point_hull(x, centers):
    """Euclidean distance to co(centers), or None when only the sampled fallback applies."""
    poly = convex_hull(centers)
    dim = x.shape[1]
    if poly.degenerate and poly.affine_dim == 0:
        return np.linalg.norm(x - poly.vertices[0], axis=1)
    if poly.degenerate and poly.affine_dim == 1:
        return _segment_distance(x, poly.vertices[0], poly.vertices[1])
    if dim == 2:
        v = poly.vertices
        d = np.min([_segment_distance(x, v[i], v[(i + 1) % len(v)]) for i in range(len(v))], axis=0)
        d[poly.contains(x)] = 0.0
        return d
    return None


def hull_mask(prims, grid: GridSpec, grow=0.0) -> BoolMask:
    """Nodes of co(prims) + B_grow, rasterized from the primitives' geometry."""
    dim = grid.ndim
    x = grid.positions().reshape(-1, dim)
    radii = {p.radius for p in prims if isinstance(p, Ball)}
    bits = None
    if all(isinstance(p, Ball) for p in prims) and len(radii) == 1:
        # co of equal balls = co(centres) + B_r
        d = _distance_to_point_hull(x, np.array([p.center for p in prims], dtype=float))
        if d is not None:
            bits = d <= radii.pop() + grow + 1e-12
            grow = 0.0
    if bits is None:
        if all(isinstance(p, Box) for p in prims):
            corners = [np.array(c) for p in prims
                       for c in np.array(np.meshgrid(*zip(p.lo, p.hi))).reshape(dim, -1).T]
            pts = np.array(corners)
        else:
            pts = np.concatenate([_primitive_boundary(p, 0.0, 0.5 * grid.h, dim, 100) for p in prims])
        bits = convex_hull(pts).contains(x, tol=1e-9)
    mask = BoolMask(bits.reshape(grid.dims), grid.origin, grid.h)
    return dilate(mask, grow) if grow > 0 else mask


def _graph_groups(g):
    parent = list(range(len(g.components)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j, _ in g.edges:
        parent[find(j)] = find(i)
    groups = {}
    for i, comp in enumerate(g.components):
        groups.setdefault(find(i), []).extend(comp)
    return [sorted(v) for _, v in sorted(groups.items())]


# --------------------------------------------------------------------------
# solver driver


def solve(cfg: RunConfig, eps=None, operator=None, t_end=None, snapshot_dt=None, on_step=None,
          solver=None, grid: GridSpec = None):
    """Run the configured solver; returns ``([(time, field), ...], step_dt)``.

    ``on_step(time, field)`` sees every step and may return False to stop.
    """
    solver = solver or cfg.solver
    section = "pde" if solver == "pde" else "game"
    params = dict(cfg.raw.get(section, {}))
    t_end = float(params["t_end"] if t_end is None else t_end)
    if snapshot_dt is not None:
        params["snapshot_dt"] = snapshot_dt
    if grid is not None:
        cfg = _with_grid(cfg, grid)
    u0 = cfg.u0_field()
    if solver == "pde":
        eps = cfg.eps_list[0] if eps is None and cfg.eps_list else eps
        psi = cfg.psi_field(eps)
        p = PdeParams.from_cfl(cfg.grid.h, cfg.dimension, t_end, float(params.get("cfl_safety", 0.9)),
                               operator=operator or params.get("operator", "min"),
                               active_set=bool(params.get("active_set", True)))
        cb = None if on_step is None else (lambda k, t, u: on_step(t, u))
        return run_pde(u0, psi, p, pde_snapshot_every(params, p.dt), cb), p.dt
    eps = float(eps if eps is not None else cfg.run_eps)
    psi = cfg.psi_field(eps)
    gp = GameParams.for_time(eps, t_end, direction_count=params.get("direction_count"), dim=cfg.dimension,
                             refine=bool(params.get("refine", True)))
    step = alt_dpp_step if solver == "alt-game" else dpp_step
    cb = None if on_step is None else (lambda k, u: on_step(k * gp.dt, u))
    snaps = run_game(u0, psi, gp, snapshot_every=game_snapshot_every(params, eps), step=step, callback=cb)
    return [(k * gp.dt, u) for k, u in snaps], gp.dt


def _with_grid(cfg: RunConfig, grid: GridSpec) -> RunConfig:
    return RunConfig(cfg.dimension, grid, cfg.obstacle, cfg.eps_list, cfg.initial, cfg.solver,
                     cfg.solver_params, cfg.output_dir, cfg.seed, cfg.raw)


def metric_series(snaps, dim, coK=None, coKeps=None, solver="game", step_dt=0.0) -> MetricSeries:
    series = MetricSeries(solver=solver, step_dt=step_dt)
    for t, u in snaps:
        mask = positivity_set(u)
        vol, rad = volume_and_radius(mask, u.h, dim)
        d1 = _safe_hausdorff(mask, coK, u.h) if coK is not None else math.nan
        d2 = _safe_hausdorff(mask, coKeps, u.h) if coKeps is not None else math.nan
        series.add(t, vol, rad, d1, d2)
    series.snapshots = list(snaps)
    return series


def run_config(cfg: RunConfig, on_step=None) -> MetricSeries:
    """Plain solve with the metrics columns filled where an obstacle is present."""
    t0 = time.perf_counter()
    snaps, dt = solve(cfg, on_step=on_step)
    coK = coKeps = None
    if not cfg.obstacle.is_empty:
        coK = hull_mask(cfg.obstacle.primitives, cfg.grid)
        eps = cfg.run_eps
        coKeps = hull_mask(cfg.obstacle.primitives, cfg.grid, cfg.dimension * eps) if eps else coK
    series = metric_series(snaps, cfg.dimension, coK, coKeps, cfg.solver, dt)
    series.summary["runtime_s"] = time.perf_counter() - t0
    return series


# --------------------------------------------------------------------------
# experiments


def _window(params, default):
    w = params.get("window", default)
    return float(w[0]), float(w[1])


def experiment_shrinking_ball(cfg: RunConfig, on_step=None) -> MetricSeries:
    """Radius of the positivity set against sqrt(R0^2 - 2t); extinction time."""
    if not cfg.obstacle.is_empty:
        raise PreconditionError("the shrinking-ball experiment needs an empty obstacle")
    if cfg.initial.get("kind", "ball") != "ball":
        raise PreconditionError("the shrinking-ball experiment needs a ball as initial set")
    R0 = float(cfg.initial.get("radius", 1.0))
    center = np.asarray(cfg.initial.get("center", [0.0] * cfg.dimension), dtype=float)
    extinct = []

    def watch(t, u):
        if on_step is not None:
            on_step(t, u)
        if not (u.values > 0).any():
            extinct.append(t)
            return False
        return None

    t0 = time.perf_counter()
    snaps, dt = solve(cfg, on_step=watch)
    runtime = time.perf_counter() - t0
    series = metric_series(snaps, cfg.dimension, solver=cfg.solver, step_dt=dt)
    params = cfg.solver_params
    w0, w1 = _window(params, [0.05, float(params["t_end"])])
    t = series.times
    exact = np.sqrt(np.maximum(R0**2 - 2.0 * t, 0.0))
    rel = np.where(exact > 0, (series.column("radius") - exact) / np.where(exact > 0, exact, 1.0), np.nan)
    sel = (t >= w0 - 1e-12) & (t <= w1 + 1e-12) & (exact > 0)
    series.extra["exact_radius"] = list(exact)
    series.extra["rel_error"] = list(rel)
    series.summary.update(
        R0=R0,
        center=center.tolist(),
        window=[w0, w1],
        sup_rel_error=float(np.max(np.abs(rel[sel]))) if sel.any() else math.nan,
        extinction_time=extinct[0] if extinct else None,
        exact_extinction_time=0.5 * R0**2,
        runtime_s=runtime,
    )
    return series


def plateau_index(snaps, h, lag=PLATEAU_LAG):
    """First snapshot i after which every lagged change stays small.

    For each i, j is the first snapshot with t_j >= t_i + lag; the plateau
    starts at the first i such that Hausdorff(mask_k, mask_j(k)) <= h for
    all k >= i that have such a j.  None if no lagged pair exists.
    """
    times = [t for t, _ in snaps]
    masks = [positivity_set(u) for _, u in snaps]
    small = []
    for i, ti in enumerate(times):
        j = next((j for j in range(i + 1, len(times)) if times[j] >= ti + lag - 1e-9), None)
        if j is None:
            break
        small.append(_safe_hausdorff(masks[i], masks[j], h) <= h + 1e-12)
    start = None
    for i in range(len(small) - 1, -1, -1):
        if not small[i]:
            break
        start = i
    return start


def experiment_convex_hull(cfg: RunConfig, reference: BoolMask = None, on_step=None) -> MetricSeries:
    """Long run against co(K); plateau detection and the sandwich check."""
    if cfg.obstacle.is_empty:
        raise PreconditionError("the convex-hull experiment needs an obstacle")
    u0 = cfg.u0_field()
    g = build_graph_G(cfg.obstacle, u0)
    if not g.connected:
        warnings.warn("graph G is disconnected; the hull limit is not expected", RuntimeWarning, stacklevel=2)
    eps = cfg.run_eps
    enl = cfg.dimension * eps if eps else 0.0
    h = cfg.grid.h
    prims = cfg.obstacle.primitives
    coK = hull_mask(prims, cfg.grid)
    coKeps = hull_mask(prims, cfg.grid, enl) if enl else coK
    groups = _graph_groups(g)
    if reference is None:
        bits = np.zeros(cfg.grid.dims, dtype=bool)
        for grp in groups:
            bits |= hull_mask([prims[i] for i in grp], cfg.grid).bits
        reference = BoolMask(bits, cfg.grid.origin, h)
    t0 = time.perf_counter()
    sdt = cfg.solver_params.get("snapshot_dt", PLATEAU_LAG)
    cb = None if on_step is None else (lambda t, u: on_step(t, u))
    snaps, dt = solve(cfg, snapshot_dt=sdt, on_step=cb)
    runtime = time.perf_counter() - t0
    series = metric_series(snaps, cfg.dimension, coK, coKeps, cfg.solver, dt)
    i = plateau_index(snaps, h)
    s = dict(connected=g.connected, components=len(g.components), groups=groups, eps=eps,
             enlarge_radius=enl, plateau_time=None, runtime_s=runtime)
    # the sandwich is checked on the final state
    k = len(snaps) - 1
    mask = positivity_set(snaps[k][1])
    upper = dilate(reference, enl + 3 * h)
    lower_ok = bool(np.all(mask.bits[reference.bits]))
    upper_ok = bool(not np.any(mask.bits & ~upper.bits))
    s.update(
        plateau_time=None if i is None else snaps[i][0],
        state_time=snaps[k][0],
        dist_coK=series.rows[k][3],
        dist_coKeps=series.rows[k][4],
        dist_reference=_safe_hausdorff(mask, reference, h),
        sandwich_lower=lower_ok,
        sandwich_upper=upper_ok,
        sandwich=lower_ok and upper_ok,
        bound=enl + 3 * h,
    )
    series.summary.update(s)
    series.graph = g
    return series


def neck_radius(u, dim):
    """Radius of the positivity set's cross-section by the plane x_1 = 0."""
    i0 = int(round(-u.origin[0] / u.h))
    i0 = min(max(i0, 0), u.dims[0] - 1)
    count = int((u.values[i0] > 0).sum())
    if dim == 2:
        return 0.5 * count * u.h
    return math.sqrt(count * u.h**2 / math.pi)


def experiment_mean_vs_min(cfg: RunConfig, on_step=None):
    """The same obstacle problem under the minimal and the mean curvature operator."""
    out = []
    params = cfg.raw.get("pde", {})
    t_end = float(params.get("t_end", 2.0))
    for op in ("min", "mean"):
        t0 = time.perf_counter()
        cb = None if on_step is None else (lambda t, u, op=op: on_step(op, t, u))
        snaps, dt = solve(cfg, operator=op, solver="pde", t_end=t_end, on_step=cb)
        coK = hull_mask(cfg.obstacle.primitives, cfg.grid) if not cfg.obstacle.is_empty else None
        series = metric_series(snaps, cfg.dimension, coK, None, "pde", dt)
        series.extra["neck"] = [neck_radius(u, cfg.dimension) for _, u in snaps]
        series.summary.update(operator=op, runtime_s=time.perf_counter() - t0)
        out.append(series)
    s_min, s_mean = out
    h = cfg.grid.h
    ball_r = min((p.radius for p in cfg.obstacle.primitives if isinstance(p, Ball)), default=1.0)
    a0, a1 = _window(params, [1.0, 2.0])
    d0, d1 = [float(v) for v in params.get("decrease_window", [0.5, 1.5])]
    t, nk = s_min.times, s_min.column("neck")
    sel = (t >= a0 - 1e-9) & (t <= a1 + 1e-9)
    tm, nm = s_mean.times, s_mean.column("neck")
    dsel = (tm >= d0 - 1e-9) & (tm <= d1 + 1e-9)
    summary = dict(
        ball_radius=ball_r,
        min_neck_window=[a0, a1],
        min_neck_lowest=float(nk[sel].min()) if sel.any() else math.nan,
        min_neck_bound=ball_r - 3 * h,
        mean_decrease_window=[d0, d1],
        mean_strictly_decreasing=bool(np.all(np.diff(nm[dsel]) < 0)) if dsel.sum() > 1 else False,
        mean_neck_final=float(nm[-1]),
        mean_neck_bound=ball_r - 5 * h,
        initial_necks_equal=bool(nk[0] == nm[0]),
    )
    summary["min_ok"] = summary["min_neck_lowest"] >= summary["min_neck_bound"]
    summary["mean_ok"] = summary["mean_strictly_decreasing"] and summary["mean_neck_final"] < summary["mean_neck_bound"]
    for s in out:
        s.summary.update(summary)
    return s_min, s_mean


def experiment_eps_refinement(cfg: RunConfig, game_fields=None, pde_fields=None):
    """Hausdorff distance between game and PDE positivity sets at a fixed time, per eps.

    Each game runs on its own grid with spacing ``h_coef * eps**2`` (or
    ``h_ratio * eps``); its field is interpolated onto the configuration grid,
    where the PDE runs.  Interpolation bias scales with (h/eps)^2, so only the
    first choice makes the game error vanish as eps shrinks.
    ``game_fields`` / ``pde_fields`` map eps to precomputed fields (game at
    round ``ceil(2t/eps^2)``, PDE at the matching time).
    """
    params = cfg.raw.get("refinement", {})
    eps_values = [float(e) for e in params.get("eps", [0.08, 0.04, 0.02])]
    t_star = float(params.get("time", 0.25))
    if "h_coef" in params:
        spacing = lambda e: float(params["h_coef"]) * e * e
    else:
        spacing = lambda e: float(params.get("h_ratio", 0.5)) * e
    game_fields = dict(game_fields or {})
    pde_fields = dict(pde_fields or {})
    lo = np.asarray(cfg.grid.origin)
    hi = cfg.grid.upper
    times = {e: GameParams.for_time(e, t_star).t_final for e in eps_values}
    for e in eps_values:
        if e not in game_fields:
            g = GridSpec.from_box(lo, hi, spacing(e), cfg.grid.far_value)
            snaps, _ = solve(cfg, eps=e, solver="game", t_end=t_star, grid=g, snapshot_dt=0)
            game_fields[e] = snaps[-1][1]
    missing = [e for e in eps_values if e not in pde_fields]
    if missing:
        # same dt as the solve below
        cfl = float(cfg.raw.get("pde", {}).get("cfl_safety", 0.9))
        p = PdeParams.from_cfl(cfg.grid.h, cfg.dimension, 1.0, cfl)
        want = {}
        for e in missing:
            want.setdefault(int(round(times[e] / p.dt)), []).append(e)

        def grab(t, u):
            for e in want.get(int(round(t / p.dt)), ()):
                pde_fields[e] = u
            return False if len(pde_fields) == len(eps_values) else None

        solve(cfg, solver="pde", t_end=max(times[e] for e in missing) + 2 * p.dt, on_step=grab, snapshot_dt=0)
    x = cfg.grid.positions().reshape(-1, cfg.dimension)
    dists = []
    for e in eps_values:
        on_grid = interpolate(game_fields[e], x).reshape(cfg.grid.dims)
        a = BoolMask(on_grid > 0, cfg.grid.origin, cfg.grid.h)
        b = positivity_set(pde_fields[e])
        dists.append(_safe_hausdorff(a, b, cfg.grid.h))
    series = MetricSeries(solver="game")
    series.summary = dict(eps=eps_values, times=[times[e] for e in eps_values], hausdorff=dists,
                          monotone=bool(all(dists[i + 1] < dists[i] for i in range(len(dists) - 1))))
    return series


EXPERIMENTS = {
    "shrinking-ball": experiment_shrinking_ball,
    "convex-hull": experiment_convex_hull,
    "mean-vs-min": experiment_mean_vs_min,
    "eps-refinement": experiment_eps_refinement,
}


# --------------------------------------------------------------------------
# output


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_outputs(series: MetricSeries, out_dir, cfg: RunConfig = None, vtk=True, name="metrics.csv",
                  timing=False):
    """metrics.csv, run.json and one VTK file per snapshot.

    Wall-clock entries are left out of run.json unless ``timing`` is set, so
    repeated runs give identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series.to_csv(out / name)
    written = []
    if vtk:
        for t, u in series.snapshots:
            if series.solver == "pde":
                fname = f"pde_t_{t:.4f}.vtk"
            else:
                fname = f"game_round_{int(round(t / series.step_dt))}.vtk"
            write_vtk(out / fname, u)
            written.append(fname)
    summary = {k: v for k, v in series.summary.items() if timing or k != "runtime_s"}
    meta = dict(version=__version__, solver=series.solver, step_dt=series.step_dt, summary=summary,
                snapshots=written, extra=series.extra)
    if cfg is not None:
        meta["config"] = cfg.raw
    write_json(out / "run.json", _jsonable(meta))
    g = getattr(series, "graph", None)
    if g is not None:
        (out / "graph_G.dot").write_text(g.to_dot())
    return out
