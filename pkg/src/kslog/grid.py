"""Uniform cell-centred grids on boxes with zero-flux finite-volume operators.

Fields are plain ndarrays of shape ``grid.shape`` (C order, x index first).
Face arrays come as a tuple with one array per axis; along axis ``d`` the
array has ``cells[d] + 1`` entries, the first and last being boundary faces.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MIN_CELLS = 4
SNAPSHOT_MAGIC = b"KSLG"
SNAPSHOT_VERSION = 1


_LO, _HI, _INNER = slice(None, -1), slice(1, None), slice(1, -1)


def along(dims: int, axis: int, sl: slice) -> tuple:
    """Index applying ``sl`` on ``axis`` and taking everything on the others."""
    if dims == 1:
        return (sl,)
    idx = [slice(None)] * dims
    idx[axis] = sl
    return tuple(idx)


@dataclass(frozen=True)
class Grid:
    extents: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        if len(self.extents) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        if any(c < MIN_CELLS for c in self.cells):
            raise ValueError(f"need at least {MIN_CELLS} cells per axis, got {self.cells}")
        if any(not (e > 0 and math.isfinite(e)) for e in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")

    @cached_property
    def dims(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extents, self.cells))

    @cached_property
    def cell_volume(self) -> float:
        return math.prod(self.h)

    @property
    def measure(self) -> float:
        return math.prod(self.extents)

    def face_measure(self, axis: int) -> float:
        """Measure of a single face normal to ``axis``."""
        return math.prod(h for d, h in enumerate(self.h) if d != axis)

    def centers(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of cell centre coordinates, each of shape ``grid.shape``."""
        axes = [(np.arange(c) + 0.5) * h for c, h in zip(self.cells, self.h)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def face_centers(self, axis: int) -> tuple[np.ndarray, ...]:
        axes = []
        for d, (c, h) in enumerate(zip(self.cells, self.h)):
            axes.append(np.arange(c + 1) * h if d == axis else (np.arange(c) + 0.5) * h)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        return self._face_shapes[axis]

    @cached_property
    def _face_shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(c + 1 if d == axis else c for d, c in enumerate(self.cells))
                     for axis in range(self.dims))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zero_faces(self) -> tuple[np.ndarray, ...]:
        return tuple(np.zeros(self.face_shape(d)) for d in range(self.dims))

    # -- quadrature ---------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Midpoint rule; exact for cellwise constant data."""
        return float(np.sum(f) * self.cell_volume)

    def integrate_faces(self, g: tuple[np.ndarray, ...]) -> float:
        """Sum of face values times the dual-cell volume.

        Interior faces carry a full cell volume, boundary faces half of it.
        """
        total = 0.0
        vol = self.cell_volume
        for axis, ga in enumerate(g):
            w = np.ones(ga.shape[axis])
            w[0] = w[-1] = 0.5
            shape = [1] * self.dims
            shape[axis] = -1
            total += float(np.sum(ga * w.reshape(shape)))
        return total * vol

    # -- differential operators --------------------------------------------

    def gradient_faces(self, f: np.ndarray) -> tuple[np.ndarray, ...]:
        """Two-point face differences, exactly zero on boundary faces."""
        out = []
        for axis, h in enumerate(self.h):
            g = np.zeros(self.face_shape(axis))
            g[along(self.dims, axis, _INNER)] = (
                f[along(self.dims, axis, _HI)] - f[along(self.dims, axis, _LO)]) / h
            out.append(g)
        return tuple(out)

    def div_flux(self, flux: tuple[np.ndarray, ...]) -> np.ndarray:
        """Cellwise divergence of face fluxes, boundary faces included as given."""
        if len(flux) != self.dims:
            raise ValueError(f"expected {self.dims} face arrays, got {len(flux)}")
        out = np.zeros(self.shape)
        for axis, (fa, h) in enumerate(zip(flux, self.h)):
            if fa.shape != self.face_shape(axis):
                raise ValueError(f"axis {axis}: face array shape {fa.shape}, "
                                 f"expected {self.face_shape(axis)}")
            out += (fa[along(self.dims, axis, _HI)]
                    - fa[along(self.dims, axis, _LO)]) / h
        return out

    def div_flux_neumann(self, flux: tuple[np.ndarray, ...]) -> np.ndarray:
        """Like ``div_flux`` but with boundary face fluxes forced to zero."""
        clean = []
        for axis, fa in enumerate(flux):
            fa = np.array(fa, dtype=float, copy=True)
            if fa.shape != self.face_shape(axis):
                raise ValueError(f"axis {axis}: face array shape {fa.shape}, "
                                 f"expected {self.face_shape(axis)}")
            lo = [slice(None)] * self.dims
            hi = [slice(None)] * self.dims
            lo[axis], hi[axis] = 0, -1
            fa[tuple(lo)] = 0.0
            fa[tuple(hi)] = 0.0
            clean.append(fa)
        return self.div_flux(tuple(clean))

    def laplacian_neumann(self, f: np.ndarray) -> np.ndarray:
        """3/5-point Laplacian with mirror ghost cells, in divergence form."""
        return self.div_flux(self.gradient_faces(f))

    def face_average(self, f: np.ndarray) -> tuple[np.ndarray, ...]:
        """Arithmetic mean of the two neighbouring cells; boundary faces copy the
        adjacent cell (the mirror ghost value)."""
        return tuple(0.5 * (a + b) for a, b in self.face_neighbours(f))

    def face_neighbours(self, f: np.ndarray) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per axis, the (lower, upper) cell values at every face, mirrored at the boundary."""
        out = []
        for axis in range(self.dims):
            first = f[along(self.dims, axis, slice(0, 1))]
            last = f[along(self.dims, axis, slice(-1, None))]
            padded = np.concatenate([first, f, last], axis=axis)
            out.append((padded[along(self.dims, axis, _LO)],
                        padded[along(self.dims, axis, _HI)]))
        return tuple(out)

    def faces_to_cells(self, g: tuple[np.ndarray, ...]) -> np.ndarray:
        """Sum over axes of the mean of each cell's two faces along that axis."""
        out = np.zeros(self.shape)
        for axis, ga in enumerate(g):
            out += 0.5 * (ga[along(self.dims, axis, _LO)]
                          + ga[along(self.dims, axis, _HI)])
        return out

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of ``laplacian_neumann`` acting on ``f.ravel()``."""
        mats = []
        for c, h in zip(self.cells, self.h):
            main = -2.0 * np.ones(c)
            main[0] = main[-1] = -1.0
            off = np.ones(c - 1)
            mats.append(sp.diags([off, main, off], [-1, 0, 1]) / (h * h))
        if self.dims == 1:
            return sp.csr_matrix(mats[0])
        ix = sp.identity(self.cells[0])
        iy = sp.identity(self.cells[1])
        return sp.csr_matrix(sp.kron(mats[0], iy) + sp.kron(ix, mats[1]))


def write_snapshot(path, grid: Grid, t: float, values: np.ndarray) -> None:
    values = np.asarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    header = SNAPSHOT_MAGIC + struct.pack("<HB", SNAPSHOT_VERSION, grid.dims)
    header += struct.pack(f"<{grid.dims}I", *grid.cells) + struct.pack("<d", t)
    Path(path).write_bytes(header + np.ascontiguousarray(values).tobytes())


def read_snapshot(path) -> tuple[tuple[int, ...], float, np.ndarray]:
    """Return (cells, time, values) from a snapshot file."""
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    version, dims = struct.unpack_from("<HB", data, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    off = 7
    cells = struct.unpack_from(f"<{dims}I", data, off)
    off += 4 * dims
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    count = math.prod(cells)
    if len(data) - off != 8 * count:
        raise ValueError(f"{path}: expected {count} values, found {(len(data) - off) // 8}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(cells).astype(float)
    return tuple(cells), t, values
