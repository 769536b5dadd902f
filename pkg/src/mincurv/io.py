"""Legacy-VTK and CSV serialization for grid fields, masks and point sets."""

import csv
import json
from pathlib import Path

import numpy as np

from .grid import BoolMask, GridField


def _vtk_header(dims, origin, h, title):
    dims3 = list(dims) + [1] * (3 - len(dims))
    origin3 = list(origin) + [0.0] * (3 - len(origin))
    npts = int(np.prod(dims))
    return [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(int(d)) for d in dims3),
        "ORIGIN " + " ".join(repr(float(o)) for o in origin3),
        "SPACING " + " ".join(repr(float(h)) for _ in range(3)),
        f"POINT_DATA {npts}",
    ]


def _vtk_order(values):
    # VTK structured points run x fastest; our arrays are indexed [i, j, k]
    return np.asarray(values).transpose().ravel()


def write_vtk(path, obj, name="u"):
    """Write a GridField or BoolMask as ASCII STRUCTURED_POINTS."""
    if isinstance(obj, BoolMask):
        dims, origin, h = obj.dims, obj.origin, obj.h
        data = _vtk_order(obj.bits.astype(float))
        title = "mincurv mask"
    else:
        dims, origin, h = obj.dims, obj.origin, obj.h
        data = _vtk_order(obj.values)
        title = f"mincurv field far_value={obj.far_value!r}"
    lines = _vtk_header(dims, origin, h, title)
    lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in data]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Read a field written by :func:`write_vtk` (the far value is parsed from the title)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path}: not a legacy VTK file")
    title = lines[1]
    header = {}
    start = None
    for i, line in enumerate(lines[2:], start=2):
        key = line.split(" ", 1)[0]
        if key in ("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA"):
            header[key] = line.split()[1:]
        if key == "LOOKUP_TABLE":
            start = i + 1
            break
    dims3 = [int(d) for d in header["DIMENSIONS"]]
    n_dim = 3 if dims3[2] > 1 else 2
    dims = tuple(dims3[:n_dim])
    origin = [float(o) for o in header["ORIGIN"]][:n_dim]
    h = float(header["SPACING"][0])
    data = np.array([float(v) for v in lines[start:start + int(np.prod(dims))]])
    values = data.reshape(dims[::-1]).transpose()
    far = -1.0
    if "far_value=" in title:
        far = float(title.split("far_value=")[1].split()[0])
    return GridField(origin, h, values, far)


def write_field_csv(path, field):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = field.ndim
        w.writerow(["i", "j", "k", "value"])
        for idx in np.ndindex(*field.dims):
            ijk = list(idx) + [0] * (3 - n)
            w.writerow(ijk + [repr(float(field.values[idx]))])


def write_points_csv(path, points, extra=None):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1] if pts.size else 0
    with open(path, "w", newline="") as fh:
        if extra:
            for key, value in extra.items():
                fh.write(f"# {key}={value}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"][:n])
        for p in pts:
            w.writerow([repr(float(c)) for c in p])


def read_points_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                continue  # header
    return np.array(rows, dtype=float)


def write_segments_csv(path, segments):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = len(segments[0][0]) if segments else 0
        names = ["x", "y", "z"][:n]
        w.writerow([f"a{c}" for c in names] + [f"b{c}" for c in names])
        for a, b in segments:
            w.writerow([repr(float(c)) for c in a] + [repr(float(c)) for c in b])


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
