"""Named initial profiles and snapshot-backed initial data."""
from __future__ import annotations

import numpy as np

from .grid import Grid, read_snapshot

PROFILES = ("constant", "gaussian-bump", "two-bumps", "checkerboard-positive", "snapshot")


def _vec(value, grid: Grid, default):
    if value is None:
        value = default
    if isinstance(value, (int, float)):
        value = [value] * grid.dims
    value = [float(x) for x in value]
    if len(value) != grid.dims:
        raise ValueError(f"expected {grid.dims} coordinates, got {value}")
    return value


def _gauss(grid: Grid, center, width):
    xs = grid.centers()
    r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
    return np.exp(-r2 / (2.0 * width * width))


def make_profile(grid: Grid, name: str, **kw) -> np.ndarray:
    """Evaluate a named profile on the cell centres.

    constant:              value
    gaussian-bump:         base + amplitude * exp(-|x-center|^2 / (2 width^2))
    two-bumps:             base + amplitude * g(center1, width) + amplitude2 * g(center2, width2)
    checkerboard-positive: base + amplitude on alternating blocks of ``block`` cells
    snapshot:              values read from ``path``
    """
    mid = [e / 2 for e in grid.extents]
    if name == "constant":
        return np.full(grid.shape, float(kw.get("value", 1.0)))
    if name == "gaussian-bump":
        c = _vec(kw.get("center"), grid, mid)
        return float(kw.get("base", 1.0)) + float(kw.get("amplitude", 1.0)) * _gauss(
            grid, c, float(kw.get("width", 0.1 * min(grid.extents))))
    if name == "two-bumps":
        c1 = _vec(kw.get("center1"), grid, [0.3 * e for e in grid.extents])
        c2 = _vec(kw.get("center2"), grid, [0.7 * e for e in grid.extents])
        amp = float(kw.get("amplitude", 1.0))
        amp2 = float(kw.get("amplitude2", amp))
        w = float(kw.get("width", 0.08 * min(grid.extents)))
        w2 = float(kw.get("width2", w))
        return float(kw.get("base", 1.0)) + amp * _gauss(grid, c1, w) + amp2 * _gauss(grid, c2, w2)
    if name == "checkerboard-positive":
        block = int(kw.get("block", 4))
        idx = np.meshgrid(*[np.arange(c) // block for c in grid.cells], indexing="ij")
        parity = sum(idx) % 2
        return float(kw.get("base", 1.0)) + float(kw.get("amplitude", 1.0)) * parity
    if name == "snapshot":
        cells, _, values = read_snapshot(kw["path"])
        if cells != grid.cells:
            raise ValueError(f"snapshot has cells {cells}, grid has {grid.cells}")
        return values
    raise ValueError(f"unknown profile {name!r}; choose from {', '.join(PROFILES)}")
