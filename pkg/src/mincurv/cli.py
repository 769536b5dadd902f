"""Command-line entry point.

Exit codes: 0 success, 2 validation failure (bad input, failed checks),
1 runtime error, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import load_config
from .epsconvex import build_graph_G, eps_convex_hull
from .errors import MincurvError
from .experiments import EXPERIMENTS, _jsonable, run_config, write_outputs
from .game import (GameParams, farthest_end_signs, play_concentric_carol, play_concentric_paul,
                   play_segment_paul)
from .io import read_points_csv, write_points_csv
from .obstacle import EnlargedObstacle, balls
from .props import run_props

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64


def _vec(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


VECTOR_FLAGS = ("--x0", "--z", "--a", "--b")
_NUMBER_LIST = re.compile(r"^-[\d.]")


def _join_vectors(argv):
    """Glue ``--a -1,0`` into ``--a=-1,0``; argparse reads a leading minus as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in VECTOR_FLAGS and i + 1 < len(argv) and _NUMBER_LIST.match(argv[i + 1]):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="mincurv", description="Minimal curvature flow with an obstacle.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("run", help="config-driven solve: snapshots, metrics.csv, run.json")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="output directory (default: output_dir of the config)")
    p.add_argument("--no-vtk", action="store_true", help="skip VTK snapshots")

    p = sub.add_parser("eps-hull", help="eps-convex hull of a point file")
    p.add_argument("points", help="CSV with one point per row")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--output", help="CSV path (default: stdout)")

    p = sub.add_parser("strategy", help="roll out a strategy and print the trajectory CSV")
    p.add_argument("--kind", required=True, choices=["concentric-paul", "concentric-carol", "segment-paul"])
    p.add_argument("--x0", type=_vec, required=True)
    p.add_argument("--z", type=_vec, help="centre (concentric strategies)")
    p.add_argument("--a", type=_vec, help="segment start (segment-paul)")
    p.add_argument("--b", type=_vec, help="segment end (segment-paul)")
    p.add_argument("--radius", type=float, default=1.0, help="radius of the balls at a and b")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--signs", choices=["random", "adversarial", "alternating"], default="random")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("graph-g", help="connectivity report of the obstacle graph")
    p.add_argument("--config", required=True)
    p.add_argument("--dot", help="write the graph in DOT format")

    p = sub.add_parser("props", help="operator, round-map and strategy property sweeps")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--no-vtk", action="store_true")
    return ap


def _cmd_run(args):
    cfg = load_config(args.config)
    series = run_config(cfg)
    out = write_outputs(series, args.output or cfg.output_dir, cfg, vtk=not args.no_vtk)
    print(f"wrote {len(series.rows)} rows to {out / 'metrics.csv'}")
    return EXIT_OK


def _cmd_eps_hull(args):
    pts = read_points_csv(args.points)
    if pts.size == 0:
        raise MincurvError(f"{args.points}: no points")
    res = eps_convex_hull(pts, args.eps, args.max_iter)
    extra = {"converged": str(res.converged).lower(), "iterations": res.iterations, "eps": args.eps,
             "semantics": res.semantics}
    if args.output:
        write_points_csv(args.output, res.points, extra)
    else:
        for k, v in extra.items():
            print(f"# {k}={v}")
        w = csv.writer(sys.stdout)
        w.writerow(["x", "y", "z"][:res.points.shape[1]])
        for p in res.points:
            w.writerow([repr(float(c)) for c in p])
    return EXIT_OK


def _signs(kind, n, rng, x0=None, a=None, b=None):
    if kind == "alternating":
        return [1 if i % 2 == 0 else -1 for i in range(n)]
    if kind == "adversarial" and a is not None:
        return farthest_end_signs(x0, a, b, n)
    return list(rng.choice([-1, 1], size=n))


def _cmd_strategy(args):
    rng = np.random.default_rng(args.seed)
    dim = len(args.x0)
    params = GameParams(args.eps, args.rounds, None, dim)
    if args.kind == "segment-paul":
        if args.a is None or args.b is None:
            raise MincurvError("segment-paul needs --a and --b")
        spec = balls([args.a, args.b], [args.radius, args.radius], dim)
        signs = _signs(args.signs, args.rounds, rng, args.x0, args.a, args.b)
        tr = play_segment_paul(args.x0, args.a, args.b, EnlargedObstacle(spec, args.eps), params, signs)
    else:
        if args.z is None:
            raise MincurvError(f"{args.kind} needs --z")
        if args.kind == "concentric-paul":
            tr = play_concentric_paul(args.x0, args.z, params, _signs(args.signs, args.rounds, rng))
        else:
            v = rng.normal(size=(args.rounds, dim))
            tr = play_concentric_carol(args.x0, args.z, params, v / np.linalg.norm(v, axis=1, keepdims=True))
    names = ["x", "y", "z"][:dim]
    w = csv.writer(sys.stdout)
    w.writerow(["round"] + names + [f"v{c}" for c in names] + ["sign", "stopped"])
    w.writerow([0] + [repr(float(c)) for c in tr.positions[0]] + [""] * dim + ["", "false"])
    for k, (v, s, stopped) in enumerate(tr.choices, start=1):
        pos = tr.positions[min(k, len(tr.positions) - 1)]
        w.writerow([k] + [repr(float(c)) for c in pos] + [repr(float(c)) for c in v] + [s, str(stopped).lower()])
    return EXIT_OK


def _cmd_graph_g(args):
    cfg = load_config(args.config)
    g = build_graph_G(cfg.obstacle, cfg.u0_field())
    print(f"components={len(g.components)} edges={len(g.edges)} connected={str(g.connected).lower()}")
    for i, comp in enumerate(g.components):
        print(f"component {i}: primitives {comp}")
    for i, j, (x, y) in g.edges:
        print(f"edge {i}-{j}: witness {np.round(x, 6).tolist()} -> {np.round(y, 6).tolist()}")
    if args.dot:
        Path(args.dot).write_text(g.to_dot())
    return EXIT_OK


def _cmd_props(args):
    results = run_props(args.trials, args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def _cmd_experiment(args):
    cfg = load_config(args.config)
    out_dir = Path(args.output or cfg.output_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = EXPERIMENTS[args.name](cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if isinstance(res, tuple):
        for s in res:
            write_outputs(s, out_dir / s.summary["operator"], cfg, vtk=not args.no_vtk)
        summary = res[0].summary
    else:
        write_outputs(res, out_dir, cfg, vtk=not args.no_vtk)
        summary = res.summary
    print(json.dumps(_jsonable({k: v for k, v in summary.items() if k != "runtime_s"}), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "eps-hull": _cmd_eps_hull,
    "strategy": _cmd_strategy,
    "graph-g": _cmd_graph_g,
    "props": _cmd_props,
    "experiment": _cmd_experiment,
}


def main(argv=None):
    argv = _join_vectors(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None or first not in COMMANDS:
        if argv and argv[0] in ("-h", "--help"):
            parser.print_help()
            return EXIT_OK
        parser.print_usage(sys.stderr)
        if first is not None:
            print(f"mincurv: unknown command {first!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (MincurvError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        nodes = getattr(exc, "nodes", None)
        if nodes:
            print("offending nodes: " + "; ".join(str(n) for n in nodes), file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level report
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


cli_main = main
