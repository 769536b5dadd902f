"""Uniform grid fields, multilinear interpolation and finite differences.

Fields are sampled on an isotropic grid ``origin + h * index``; every read
outside the box returns the field's ``far_value``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .errors import EmptySetError


def grid_dims(lo, hi, h):
    """Node counts for a box ``[lo, hi]`` with spacing ``h`` (hi is rounded up)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return tuple(int(n) for n in np.ceil((hi - lo) / h - 1e-9).astype(int) + 1)


@dataclass(frozen=True)
class GridSpec:
    origin: tuple
    h: float
    dims: tuple
    far_value: float = -1.0

    @classmethod
    def from_box(cls, lo, hi, h, far_value=-1.0):
        return cls(tuple(float(v) for v in lo), float(h), grid_dims(lo, hi, h), float(far_value))

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def upper(self):
        return np.asarray(self.origin) + self.h * (np.array(self.dims) - 1)

    def positions(self):
        return node_positions(np.asarray(self.origin, dtype=float), self.h, self.dims)

    def sample(self, func, far_value=None):
        far = self.far_value if far_value is None else far_value
        return GridField.sample(func, self.origin, self.h, self.dims, far)


@dataclass(frozen=True)
class GridField:
    origin: np.ndarray
    h: float
    values: np.ndarray
    far_value: float = -1.0

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float)
        if values.ndim != origin.size:
            raise ValueError(f"values have {values.ndim} axes but origin has {origin.size} coordinates")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if min(values.shape) < 2:
            raise ValueError("every axis needs at least two nodes")
        origin.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "far_value", float(self.far_value))

    @classmethod
    def sample(cls, func, origin, h, dims, far_value=-1.0):
        """Evaluate ``func`` (vectorized over a trailing coordinate axis) at all nodes."""
        origin = np.asarray(origin, dtype=float)
        pts = node_positions(origin, h, dims)
        return cls(origin, h, np.asarray(func(pts), dtype=float).reshape(dims), far_value)

    @classmethod
    def from_box(cls, func, lo, hi, h, far_value=-1.0):
        return cls.sample(func, lo, h, grid_dims(lo, hi, h), far_value)

    @property
    def dims(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def upper(self):
        return self.origin + self.h * (np.array(self.dims) - 1)

    def positions(self):
        return node_positions(self.origin, self.h, self.dims)

    def node_position(self, node):
        return self.origin + self.h * np.asarray(node, dtype=float)

    @property
    def spec(self):
        return GridSpec(tuple(self.origin), self.h, self.dims, self.far_value)

    def with_values(self, values):
        return GridField(self.origin, self.h, values, self.far_value)

    def same_grid(self, other):
        return (
            self.dims == other.dims
            and self.h == other.h
            and np.array_equal(self.origin, other.origin)
        )


@dataclass(frozen=True)
class BoolMask:
    bits: np.ndarray
    origin: np.ndarray = dc_field(default=None)
    h: float = 1.0

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        origin = np.zeros(bits.ndim) if self.origin is None else np.array(self.origin, dtype=float)
        object.__setattr__(self, "origin", origin)

    @property
    def dims(self):
        return self.bits.shape

    def count(self):
        return int(self.bits.sum())

    def points(self):
        idx = np.argwhere(self.bits)
        return self.origin + self.h * idx


def node_positions(origin, h, dims):
    axes = [origin[i] + h * np.arange(n) for i, n in enumerate(dims)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def interpolate(field: GridField, x):
    """Multilinear interpolation at ``x`` (shape (N,) or (..., N)).

    Points outside the closed grid box get ``field.far_value``.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = x.reshape(-1, field.ndim)
    dims = np.array(field.dims)
    f = (pts - field.origin) / field.h
    inside = np.all((f >= -1e-12) & (f <= dims - 1 + 1e-12), axis=1)
    i0 = np.clip(np.floor(f).astype(np.int64), 0, dims - 2)
    s = np.clip(f - i0, 0.0, 1.0)
    out = np.zeros(len(pts))
    vals = field.values
    for corner in itertools.product((0, 1), repeat=field.ndim):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, s, 1.0 - s), axis=1)
        idx = tuple((i0 + c).T)
        out += w * vals[idx]
    out = np.where(inside, out, field.far_value)
    if scalar:
        return float(out[0])
    return out.reshape(x.shape[:-1])


def shifted_interpolate(field: GridField, offset):
    """Interpolated values at every ``node + offset`` for a constant offset.

    Equivalent to calling :func:`interpolate` at all shifted node positions,
    but the multilinear weights are shared by every node so the work reduces
    to 2**N weighted array slices.
    """
    offset = np.asarray(offset, dtype=float)
    return NodeSampler(field, float(np.max(np.abs(offset)))).shifted(offset)


class NodeSampler:
    """Repeated interpolation at ``node + offset`` for one field.

    The field is padded once with ``far_value`` so that both constant offsets
    (array slices) and per-node offsets (flat gathers) avoid clipping.  Results
    match :func:`interpolate` and :func:`shifted_interpolate`.
    """

    def __init__(self, field: GridField, reach: float):
        self.field = field
        self.pad = int(math.ceil(reach / field.h)) + 2
        self.padded = np.pad(field.values, self.pad, mode="constant", constant_values=field.far_value)
        self.flat = self.padded.ravel()
        self.strides = np.array([s // self.padded.itemsize for s in self.padded.strides], dtype=np.int64)
        self.dims = np.array(field.dims)
        self._nodes = None

    @property
    def nodes(self):
        if self._nodes is None:
            grids = np.meshgrid(*[np.arange(d, dtype=float) for d in self.field.dims], indexing="ij")
            self._nodes = np.stack([g.ravel() for g in grids], axis=1)
        return self._nodes

    def shifted(self, offset):
        f = self.field
        q = np.asarray(offset, dtype=float) / f.h
        k = np.floor(q).astype(np.int64)
        s = q - k
        hi = s > 1.0 - 1e-12
        k = np.where(hi, k + 1, k)
        s = np.where(hi, 0.0, s)
        out = np.zeros(f.dims)
        for corner in itertools.product((0, 1), repeat=f.ndim):
            w = 1.0
            sl = []
            for ax in range(f.ndim):
                c = corner[ax]
                w *= s[ax] if c else 1.0 - s[ax]
                start = self.pad + k[ax] + c
                sl.append(slice(start, start + f.dims[ax]))
            if w != 0.0:
                out += w * self.padded[tuple(sl)]
        inside = np.ones(f.dims, dtype=bool)
        for ax in range(f.ndim):
            i = np.arange(f.dims[ax]) + q[ax]
            ok = (i >= -1e-12) & (i <= f.dims[ax] - 1 + 1e-12)
            shape = [1] * f.ndim
            shape[ax] = f.dims[ax]
            inside &= ok.reshape(shape)
        return np.where(inside, out, f.far_value)

    def at_offsets(self, offsets, nodes=None):
        """Values at ``nodes[i] + offsets[i]`` (flat node order by default)."""
        f = self.field
        nodes = self.nodes if nodes is None else nodes
        q = nodes + np.asarray(offsets, dtype=float) / f.h
        inside = np.all((q >= -1e-12) & (q <= self.dims - 1 + 1e-12), axis=1)
        k = np.floor(q)
        s = q - k
        base = (k.astype(np.int64) + self.pad) @ self.strides
        out = np.zeros(len(q))
        for corner in itertools.product((0, 1), repeat=f.ndim):
            c = np.array(corner)
            w = np.prod(np.where(c == 1, s, 1.0 - s), axis=1) if f.ndim > 2 else (
                (s[:, 0] if corner[0] else 1.0 - s[:, 0]) * (s[:, 1] if corner[1] else 1.0 - s[:, 1]))
            out += w * self.flat[base + int(c @ self.strides)]
        return np.where(inside, out, f.far_value)


def positivity_set(field: GridField) -> BoolMask:
    return BoolMask(field.values > 0, field.origin, field.h)


def _padded(field, width=1):
    return np.pad(field.values, width, mode="constant", constant_values=field.far_value)


def grad_hess(field: GridField, node):
    """Central-difference gradient and Hessian at one node.

    Neighbours outside the grid are ghost nodes holding ``far_value``.
    """
    node = tuple(int(i) + 1 for i in node)
    u = _padded(field)
    n = field.ndim
    h = field.h
    eye = np.eye(n, dtype=int)

    def at(shift):
        return u[tuple(np.add(node, shift))]

    c = at(np.zeros(n, dtype=int))
    g = np.empty(n)
    H = np.empty((n, n))
    for i in range(n):
        up, dn = at(eye[i]), at(-eye[i])
        g[i] = (up - dn) / (2 * h)
        H[i, i] = (up - 2 * c + dn) / h**2
        for j in range(i + 1, n):
            d = (at(eye[i] + eye[j]) - at(eye[i] - eye[j]) - at(-eye[i] + eye[j]) + at(-eye[i] - eye[j])) / (4 * h**2)
            H[i, j] = H[j, i] = d
    return g, H


def grad_hess_field(field: GridField, index=None):
    """Vectorized central differences.

    With ``index=None`` every node is processed and the arrays have shape
    ``dims + (N,)`` / ``dims + (N, N)``.  Otherwise ``index`` is a tuple of
    integer arrays (as from ``np.nonzero``) and the leading shape is the
    number of selected nodes.
    """
    u = _padded(field)
    n = field.ndim
    h = field.h
    dims = field.dims

    if index is None:
        def at(shift):
            return u[tuple(slice(1 + s, 1 + s + d) for s, d in zip(shift, dims))]
    else:
        base = tuple(np.asarray(ix) + 1 for ix in index)

        def at(shift):
            return u[tuple(b + s for b, s in zip(base, shift))]

    zero = (0,) * n
    c = at(zero)
    lead = c.shape
    g = np.empty(lead + (n,))
    H = np.empty(lead + (n, n))
    for i in range(n):
        ei = tuple(1 if a == i else 0 for a in range(n))
        up = at(ei)
        dn = at(tuple(-a for a in ei))
        g[..., i] = (up - dn) / (2 * h)
        H[..., i, i] = (up - 2 * c + dn) / h**2
        for j in range(i + 1, n):
            pp = tuple(1 if a in (i, j) else 0 for a in range(n))
            pm = tuple(1 if a == i else (-1 if a == j else 0) for a in range(n))
            d = (at(pp) - at(pm) - at(tuple(-a for a in pm)) + at(tuple(-a for a in pp))) / (4 * h**2)
            H[..., i, j] = d
            H[..., j, i] = d
    return g, H


def hausdorff_distance(a: BoolMask, b: BoolMask, h: float) -> float:
    """Symmetric Hausdorff distance between the node sets of two masks."""
    if a.dims != b.dims:
        raise ValueError(f"mask dims differ: {a.dims} vs {b.dims}")
    if not a.bits.any() or not b.bits.any():
        raise EmptySetError("Hausdorff distance of an empty mask")
    d_to_b = ndimage.distance_transform_edt(~b.bits, sampling=h)
    d_to_a = ndimage.distance_transform_edt(~a.bits, sampling=h)
    return float(max(d_to_b[a.bits].max(), d_to_a[b.bits].max()))


def dilate(mask: BoolMask, radius: float) -> BoolMask:
    """Nodes within Euclidean distance ``radius`` of the mask."""
    if not mask.bits.any():
        return mask
    d = ndimage.distance_transform_edt(~mask.bits, sampling=mask.h)
    return BoolMask(d <= radius + 1e-12, mask.origin, mask.h)
