"""Cell-centred scalars, face-centred (MAC) vectors and the discrete operators on them.

Array index order is ``(x, y[, z])``: axis ``d`` of every array is physical axis ``d``.
A scalar lives on ``grid.cells``; component ``d`` of a vector field has one extra
entry along axis ``d`` (the faces normal to that axis, boundary faces included).

Boundary conditions are realised through ghost cells: ``neumann_zero`` mirrors the
adjacent cell (boundary-face gradient 0), ``dirichlet_zero`` negates it (boundary-face
gradient ``2 s/h``).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameter

SCALAR_BCS = ("neumann_zero", "dirichlet_zero")
# "free" marks a face field whose boundary-normal entries carry data (e.g. the
# gradient of a Dirichlet scalar); the two others pin them to 0.
VECTOR_BCS = ("dirichlet_zero", "flux_zero", "free")


@dataclass(frozen=True)
class Grid:
    cells: tuple
    lengths: tuple

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        lengths = tuple(float(v) for v in self.lengths)
        if len(cells) not in (2, 3):
            raise InvalidParameter(f"grid must be 2D or 3D, got {len(cells)} axes")
        if len(lengths) != len(cells):
            raise InvalidParameter("cells and lengths must have the same number of axes")
        if any(c < 4 for c in cells):
            raise InvalidParameter(f"need at least 4 cells per axis, got {cells}")
        if any(not np.isfinite(v) or v <= 0 for v in lengths):
            raise InvalidParameter(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, dim, n, length=1.0):
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def h_min(self):
        return min(self.spacing)

    @property
    def n_cells(self):
        return int(np.prod(self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    def face_shape(self, axis):
        shape = list(self.cells)
        shape[axis] += 1
        return tuple(shape)

    def centers(self, axis):
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def faces(self, axis):
        return np.arange(self.cells[axis] + 1) * self.spacing[axis]

    def mesh(self):
        """Cell-centre coordinate arrays, one per axis, each of shape ``cells``."""
        return np.meshgrid(*(self.centers(d) for d in range(self.dim)), indexing="ij")

    def face_mesh(self, axis):
        """Coordinates of the faces normal to ``axis``."""
        axes = [self.faces(d) if d == axis else self.centers(d) for d in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray
    bc: str = "neumann_zero"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.cells:
            raise InvalidParameter(f"scalar shape {self.values.shape} != grid {self.grid.cells}")
        if self.bc not in SCALAR_BCS:
            raise InvalidParameter(f"unknown scalar boundary tag {self.bc!r}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("scalar field has non-finite entries")

    @classmethod
    def zeros(cls, grid, bc="neumann_zero"):
        return cls(grid, np.zeros(grid.cells), bc)

    @classmethod
    def constant(cls, grid, value, bc="neumann_zero"):
        return cls(grid, np.full(grid.cells, float(value)), bc)

    def copy(self):
        return ScalarField(self.grid, self.values.copy(), self.bc)


@dataclass
class VectorField:
    grid: Grid
    components: tuple
    bc: str = "dirichlet_zero"

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        if len(comps) != self.grid.dim:
            raise InvalidParameter("need one face array per axis")
        for d, c in enumerate(comps):
            if c.shape != self.grid.face_shape(d):
                raise InvalidParameter(
                    f"component {d} shape {c.shape} != face shape {self.grid.face_shape(d)}")
            if not np.all(np.isfinite(c)):
                raise InvalidParameter(f"component {d} has non-finite entries")
        if self.bc not in VECTOR_BCS:
            raise InvalidParameter(f"unknown vector boundary tag {self.bc!r}")
        if self.bc != "free":
            for d, c in enumerate(comps):
                if np.any(_boundary_faces(c, d) != 0.0):
                    raise InvalidParameter(
                        f"{self.bc} field has non-zero boundary-normal entries on axis {d}")
        self.components = comps

    @classmethod
    def zeros(cls, grid, bc="dirichlet_zero"):
        return cls(grid, tuple(np.zeros(grid.face_shape(d)) for d in range(grid.dim)), bc)

    @classmethod
    def constant(cls, grid, vec, bc="dirichlet_zero"):
        """Constant vector on every face; boundary-normal faces are zeroed unless ``bc='free'``."""
        vec = np.broadcast_to(np.asarray(vec, dtype=float), (grid.dim,))
        comps = []
        for d in range(grid.dim):
            a = np.full(grid.face_shape(d), vec[d])
            if bc != "free":
                zero_boundary_normal(a, d)
            comps.append(a)
        return cls(grid, tuple(comps), bc)

    def copy(self):
        return VectorField(self.grid, tuple(c.copy() for c in self.components), self.bc)


def _boundary_faces(a, axis):
    return np.concatenate([np.take(a, [0], axis=axis).ravel(), np.take(a, [-1], axis=axis).ravel()])


def _index(axis, sl, ndim):
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


def zero_boundary_normal(a, axis):
    """In place: zero the first and last face layers of a face array along ``axis``."""
    a[_index(axis, 0, a.ndim)] = 0.0
    a[_index(axis, -1, a.ndim)] = 0.0
    return a


def face_diff(values, axis, h, bc):
    """Face-centred difference ``(s[i+1]-s[i])/h`` along one axis, boundary faces by ghost rule."""
    shape = list(values.shape)
    shape[axis] += 1
    out = np.empty(shape)
    nd = values.ndim
    out[_index(axis, slice(1, -1), nd)] = np.diff(values, axis=axis) / h
    if bc == "neumann_zero":
        out[_index(axis, 0, nd)] = 0.0
        out[_index(axis, -1, nd)] = 0.0
    else:
        # ghost = -s: (s0 - ghost)/h at the low face, (ghost - sN)/h at the high face
        out[_index(axis, 0, nd)] = 2.0 * values[_index(axis, 0, nd)] / h
        out[_index(axis, -1, nd)] = -2.0 * values[_index(axis, -1, nd)] / h
    return out


def gradient(s: ScalarField) -> VectorField:
    g = s.grid
    comps = tuple(face_diff(s.values, d, g.spacing[d], s.bc) for d in range(g.dim))
    return VectorField(g, comps, "dirichlet_zero" if s.bc == "neumann_zero" else "free")


def divergence_values(components, spacing):
    out = np.diff(components[0], axis=0) / spacing[0]
    for d in range(1, len(components)):
        out += np.diff(components[d], axis=d) / spacing[d]
    return out


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, divergence_values(v.components, v.grid.spacing))


def laplacian(s: ScalarField) -> ScalarField:
    """Five/seven-point Laplacian, built as divergence of the face gradient.

    Composing the two operators makes the stencil identical to ``divergence(gradient(s))``
    and gives exact flux telescoping for ``neumann_zero`` fields.
    """
    g = s.grid
    comps = [face_diff(s.values, d, g.spacing[d], s.bc) for d in range(g.dim)]
    return ScalarField(g, divergence_values(comps, g.spacing), s.bc)


def face_average(s: ScalarField) -> VectorField:
    """Arithmetic mean of the two cells adjacent to each face; boundary faces copy the inner cell."""
    g = s.grid
    comps = []
    for d in range(g.dim):
        a = s.values
        out = np.empty(g.face_shape(d))
        nd = a.ndim
        out[_index(d, slice(1, -1), nd)] = 0.5 * (a[_index(d, slice(1, None), nd)]
                                                  + a[_index(d, slice(None, -1), nd)])
        out[_index(d, 0, nd)] = a[_index(d, 0, nd)]
        out[_index(d, -1, nd)] = a[_index(d, -1, nd)]
        comps.append(out)
    return VectorField(g, tuple(comps), "free")


def integrate(s: ScalarField) -> float:
    return float(np.sum(s.values) * s.grid.cell_volume)


def lp_norm(s: ScalarField, p) -> float:
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(s.values)))
    p = float(p)
    if not p >= 1.0:
        raise InvalidParameter(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(s.values)
    return float((np.sum(a ** p) * s.grid.cell_volume) ** (1.0 / p))


def inner(v: VectorField, w: VectorField) -> float:
    """Face inner product: every face carries one cell volume."""
    return float(sum(np.sum(a * b) for a, b in zip(v.components, w.components)) * v.grid.cell_volume)


def vector_l2(v: VectorField) -> float:
    return float(np.sqrt(inner(v, v)))


def vector_linf(v: VectorField) -> float:
    return float(max(np.max(np.abs(c)) for c in v.components))


def cell_gradient_magnitude(s: ScalarField) -> ScalarField:
    """|grad s| at cell centres from second-order central / one-sided differences.

    Unlike :func:`gradient` this does not impose the boundary tag, so fields that do
    not satisfy it (e.g. a linear profile) are still measured to second order.
    """
    g = s.grid
    parts = np.gradient(s.values, *g.spacing, edge_order=2)
    mag = np.sqrt(sum(p * p for p in parts))
    return ScalarField(g, mag, s.bc)


# --- snapshot files ---------------------------------------------------------

SNAPSHOT_MAGIC = b"KSSF"
SNAPSHOT_VERSION = 1
KIND_TAGS = {"n": 1, "c": 2, "p": 3, "u": 4}
_KIND_NAMES = {v: k for k, v in KIND_TAGS.items()}
# magic, version, dim, cells x3 (unused axes 0), kind, reserved, time, padding
_HEADER = struct.Struct("<4sIIQQQIId12x")
assert _HEADER.size == 64


@dataclass
class Snapshot:
    kind: str
    t: float
    cells: tuple
    arrays: list = field(default_factory=list)


def write_snapshot(path, obj, kind, t=0.0):
    """Write one field to a ``KSSF`` file.

    Scalars are stored row-major (last axis fastest). The velocity (kind ``u``) stores
    its face components one after the other in axis order.
    """
    if kind not in KIND_TAGS:
        raise InvalidParameter(f"unknown snapshot kind {kind!r}")
    g = obj.grid
    cells = list(g.cells) + [0] * (3 - g.dim)
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.dim, *cells, KIND_TAGS[kind], 0, float(t))
    arrays = obj.components if isinstance(obj, VectorField) else (obj.values,)
    with open(Path(path), "wb") as fh:
        fh.write(header)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes(order="C"))


def read_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    if len(raw) < 64:
        raise InvalidParameter("snapshot shorter than its header")
    magic, version, dim, c0, c1, c2, tag, _, t = _HEADER.unpack(raw[:64])
    if magic != SNAPSHOT_MAGIC:
        raise InvalidParameter(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise InvalidParameter(f"unsupported snapshot version {version}")
    cells = (c0, c1, c2)[:dim]
    kind = _KIND_NAMES.get(tag)
    if kind is None:
        raise InvalidParameter(f"unknown kind tag {tag}")
    data = np.frombuffer(raw, dtype="<f8", offset=64)
    shapes = [cells] if kind != "u" else [tuple(c + (d == a) for a, c in enumerate(cells)) for d in range(dim)]
    arrays, pos = [], 0
    for shp in shapes:
        size = int(np.prod(shp))
        arrays.append(data[pos:pos + size].reshape(shp).copy())
        pos += size
    if pos != data.size:
        raise InvalidParameter("snapshot payload size does not match header")
    return Snapshot(kind, t, tuple(cells), arrays)
