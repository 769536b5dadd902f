"""TOML run configuration.

Schema (all lengths in the same spatial units)::

    dimension = 2                 # 2 or 3
    solver = "game"               # game | alt-game | pde
    output_dir = "out"

    [grid]
    lo = [-1.5, -1.5]
    hi = [1.5, 1.5]
    h = 0.01
    far_value = -0.25             # optional, defaults to -initial.clip; must be < 0

    [obstacle]                    # optional; omit for an empty obstacle
    modulus = 1.0
    eps = [0.1]
    balls = [{center = [2.0, 0.0], radius = 1.0}]
    boxes = [{lo = [..], hi = [..]}]

    [initial]
    kind = "ball"                 # ball | ellipsoid | capsule | balls
    center = [0.0, 0.0]
    radius = 1.0                  # ball, capsule, balls
    semi_axes = [3.4, 1.9]        # ellipsoid
    a = [-2.0, 0.0]               # capsule segment ends
    b = [2.0, 0.0]
    centers = [[..], [..]]        # balls (union)
    clip = 0.25                   # u0 = clip(signed distance, -clip, clip)

    [game]
    eps = 0.02                    # only when there is no obstacle
    t_end = 0.4
    direction_count = 32
    refine = true
    snapshot_dt = 0.04

    [pde]
    t_end = 0.4
    cfl_safety = 0.9
    operator = "min"              # min | mean
    active_set = true
    snapshot_dt = 0.04
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .grid import GridField, GridSpec
from .obstacle import NO_OBSTACLE, Ball, Box, EnlargedObstacle, ObstacleSpec, psi_eps_field

SOLVERS = ("game", "alt-game", "pde")


def _segment_distance(x, a, b):
    ab = b - a
    t = np.clip(((x - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(x - (a + t[..., None] * ab), axis=-1)


def initial_function(spec: dict, dim: int):
    """Signed function of the initial set (positive inside), before clipping."""
    kind = spec.get("kind", "ball")
    vec = lambda key, default=None: np.asarray(spec.get(key, default), dtype=float)
    if kind == "ball":
        c, r = vec("center", [0.0] * dim), float(spec.get("radius", 1.0))
        return lambda x: r - np.linalg.norm(x - c, axis=-1)
    if kind == "ellipsoid":
        c, ax = vec("center", [0.0] * dim), vec("semi_axes")
        # rescaled so the gradient is O(1) near the boundary
        return lambda x: ax.min() * (1.0 - np.linalg.norm((x - c) / ax, axis=-1))
    if kind == "capsule":
        a, b, r = vec("a"), vec("b"), float(spec["radius"])
        return lambda x: r - _segment_distance(x, a, b)
    if kind == "balls":
        cs = np.asarray(spec["centers"], dtype=float)
        radii = np.broadcast_to(np.asarray(spec.get("radius", 1.0), dtype=float), (len(cs),))
        return lambda x: np.max([r - np.linalg.norm(x - c, axis=-1) for c, r in zip(cs, radii)], axis=0)
    raise ConfigError(f"unknown initial kind {kind!r}")


@dataclass
class RunConfig:
    dimension: int
    grid: GridSpec
    obstacle: ObstacleSpec
    eps_list: list
    initial: dict
    solver: str
    solver_params: dict
    output_dir: Path
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @property
    def clip(self):
        return float(self.initial.get("clip", 1.0))

    def u0_field(self) -> GridField:
        f = initial_function(self.initial, self.dimension)
        c = self.clip
        return self.grid.sample(lambda x: np.clip(f(x), -c, c))

    def psi_field(self, eps=None) -> GridField:
        """Enlarged obstacle function on the grid; ``eps=None`` samples the base obstacle."""
        if self.obstacle.is_empty:
            return GridField(self.grid.origin, self.grid.h, np.full(self.grid.dims, NO_OBSTACLE), self.grid.far_value)
        if eps is None:
            return self.grid.sample(self.obstacle.psi)
        f = psi_eps_field(EnlargedObstacle(self.obstacle, eps), self.grid)
        return GridField(f.origin, f.h, f.values, self.grid.far_value)

    @property
    def game_eps(self):
        if self.eps_list:
            return self.eps_list
        return [float(self.solver_params["eps"])]

    @property
    def run_eps(self):
        """Scale of the obstacle enlargement used by the configured solver (None: base obstacle)."""
        if self.solver == "pde":
            return self.eps_list[0] if self.eps_list else None
        return self.game_eps[0]


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return d[key]


def _vector(v, dim, what):
    a = np.asarray(v, dtype=float)
    if a.shape != (dim,):
        raise ConfigError(f"{what} must have {dim} coordinates, got {list(np.atleast_1d(a))}")
    return a


def parse_config(data: dict) -> RunConfig:
    dim = int(_require(data, "dimension", "top level"))
    if dim not in (2, 3):
        raise ConfigError("dimension must be 2 or 3")
    solver = data.get("solver", "game")
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}, got {solver!r}")
    g = _require(data, "grid", "top level")
    lo = _vector(_require(g, "lo", "grid"), dim, "grid.lo")
    hi = _vector(_require(g, "hi", "grid"), dim, "grid.hi")
    h = float(_require(g, "h", "grid"))
    if not h > 0 or np.any(hi <= lo):
        raise ConfigError("grid needs h > 0 and hi > lo")
    initial = dict(_require(data, "initial", "top level"))
    clip = float(initial.get("clip", 1.0))
    if not clip > 0:
        raise ConfigError("initial.clip must be positive")
    far = float(g.get("far_value", -clip))
    if not far < 0:
        raise ConfigError(f"far_value must be negative (the limit of u0 at infinity), got {far}")
    grid = GridSpec.from_box(lo, hi, h, far)

    ob = data.get("obstacle", {})
    prims = []
    for b in ob.get("balls", []):
        prims.append(Ball(tuple(_vector(b["center"], dim, "ball center")), float(b["radius"])))
    for b in ob.get("boxes", []):
        prims.append(Box(tuple(_vector(b["lo"], dim, "box lo")), tuple(_vector(b["hi"], dim, "box hi"))))
    try:
        obstacle = ObstacleSpec(tuple(prims), dim, float(ob.get("modulus", 1.0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    eps_list = [float(e) for e in ob.get("eps", [])]
    if prims and not eps_list and solver != "pde":
        raise ConfigError("obstacle.eps is required for the game solvers")
    if any(e <= 0 for e in eps_list):
        raise ConfigError("every eps must be positive")

    section = "pde" if solver == "pde" else "game"
    params = dict(data.get(section, {}))
    if "t_end" not in params:
        raise ConfigError(f"missing key 't_end' in [{section}]")
    if section == "game" and not eps_list and "eps" not in params:
        raise ConfigError("give game.eps (or obstacle.eps)")
    try:
        initial_function(initial, dim)
    except KeyError as exc:
        raise ConfigError(f"initial set is missing {exc}") from exc
    out = Path(data.get("output_dir", "out"))
    return RunConfig(dim, grid, obstacle, eps_list, initial, solver, params, out,
                     int(data.get("seed", 0)), data)


def check_initial_covers_obstacle(cfg: RunConfig, max_report=10):
    """Nodes where psi_eps > 0 but u0 <= 0, as coordinate lists."""
    if cfg.obstacle.is_empty:
        return []
    u0 = cfg.u0_field().values
    bad = []
    eps_values = cfg.eps_list or [0.0]
    for eps in eps_values:
        if eps <= 0:
            continue
        psi = cfg.psi_field(eps).values
        idx = np.argwhere((psi > 0) & (u0 <= 0))
        for node in idx[:max_report]:
            bad.append([float(v) for v in np.asarray(cfg.grid.origin) + cfg.grid.h * node])
    return bad


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(data)
    bad = check_initial_covers_obstacle(cfg)
    if bad:
        raise ConfigError(f"{path}: initial set does not contain the enlarged obstacle; e.g. at {bad[0]}", nodes=bad)
    return cfg


def game_snapshot_every(params: dict, eps):
    dt = 0.5 * eps * eps
    sdt = params.get("snapshot_dt")
    return max(1, int(round(float(sdt) / dt))) if sdt else 0


def pde_snapshot_every(params: dict, dt):
    sdt = params.get("snapshot_dt")
    return max(1, int(math.floor(float(sdt) / dt + 1e-9))) if sdt else 0
