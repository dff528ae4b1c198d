"""Time integration of the saturated Keller-Segel system with logarithmic sensitivity.

    u_t = div(grad u - chi (u/v) grad v)
    v_t = lap v - v + u / (1 + u/k)

with zero-flux boundaries, on a cell-centred finite-volume grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.sparse import identity
from scipy.sparse.linalg import cg

from .grid import Grid
from .params import ModelParams

logger = logging.getLogger(__name__)

CG_RTOL = 1e-10


class SolverAbort(RuntimeError):
    """A step could not be completed; ``t`` is the time at which it was attempted."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:.17g})")
        self.t = t


class PositivityError(SolverAbort):
    pass


class StabilityError(SolverAbort):
    pass


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class SolverConfig:
    t_end: float
    dt_max: float
    cfl_safety: float = 0.9
    scheme: str = "explicit"
    # "central" is for convergence studies: no positivity guarantee
    flux: str = "upwind"

    def __post_init__(self):
        if self.scheme not in ("explicit", "imex"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.flux not in ("upwind", "central"):
            raise ValueError(f"unknown flux {self.flux!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")


def saturate(u: np.ndarray, k: float) -> np.ndarray:
    return u / (1.0 + u / k)


def regularize_initial_data(u0: np.ndarray, v0: np.ndarray, p: ModelParams):
    """Clamp initial data into [k^(-b/a), k] and [k^(-a/b), k].

    The clamped pair satisfies u^-a v^-b <= max(u0^-a v0^-b, 1) cellwise.
    """
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if np.any(u0 < 0) or np.any(v0 < 0):
        raise ValueError("initial data must be non-negative")
    if not (np.any(u0 > 0) and np.any(v0 > 0)):
        raise ValueError("initial data must not vanish identically")
    k = p.k
    uk = np.maximum(k ** (-p.b / p.a), np.minimum(u0, k))
    vk = np.maximum(k ** (-p.a / p.b), np.minimum(v0, k))
    return uk, vk


def _check_positive(state: State, what: str = "state"):
    for name, f in (("u", state.u), ("v", state.v)):
        if not np.all(np.isfinite(f)):
            raise PositivityError(f"{what}: non-finite values in {name}", state.t)
        m = float(f.min())
        if m <= 0:
            raise PositivityError(f"{what}: min({name}) = {m:.3e} <= 0", state.t)


def _ratio_at_faces(grid: Grid, ratio: np.ndarray, grad_v, scheme: str):
    if scheme == "central":
        return grid.face_average(ratio)
    # drift points along +grad v: take the lower cell when grad v >= 0
    return tuple(np.where(gv >= 0, lo, hi)
                 for (lo, hi), gv in zip(grid.face_neighbours(ratio), grad_v))


def advective_flux(grid: Grid, state: State, p: ModelParams, scheme: str = "upwind"):
    """Face values of -chi (u/v) grad v; zero on boundary faces."""
    if float(state.v.min()) <= 0:
        raise PositivityError("advective flux needs v > 0", state.t)
    gv = grid.gradient_faces(state.v)
    r = _ratio_at_faces(grid, state.u / state.v, gv, scheme)
    return tuple(-p.chi * ra * ga for ra, ga in zip(r, gv))


def chemotactic_flux(grid: Grid, state: State, p: ModelParams, scheme: str = "upwind"):
    """Face values of grad u - chi (u/v) grad v; zero on boundary faces."""
    adv = advective_flux(grid, state, p, scheme)
    gu = grid.gradient_faces(state.u)
    return tuple(g + f for g, f in zip(gu, adv))


def max_drift_speeds(grid: Grid, state: State, p: ModelParams) -> tuple[float, ...]:
    """Per axis, the largest chi |grad v| / v over faces, v from either neighbour."""
    gv = grid.gradient_faces(state.v)
    vmin_face = tuple(1.0 / r for r in _faces_max(grid, 1.0 / state.v))
    return tuple(float(np.max(p.chi * np.abs(g) / vm)) for g, vm in zip(gv, vmin_face))


def _faces_max(grid: Grid, f: np.ndarray):
    return [np.maximum(lo, hi) for lo, hi in grid.face_neighbours(f)]


def stability_limit(grid: Grid, state: State, p: ModelParams, scheme: str) -> float:
    """Largest dt for which the scheme keeps u and v positive.

    Explicit: each cell keeps a nonnegative own-coefficient, i.e.
        dt * (sum_d 2/h_d^2 + sum_d 2 s_d/h_d) <= 1  for u,
        dt * (sum_d 2/h_d^2 + 1) <= 1                for v,
    where s_d is the largest drift speed chi |dv|/v on axis d.  This is never
    larger than min(h^2/(2 dims), h/s).  IMEX only has the advective part.
    """
    speeds = max_drift_speeds(grid, state, p)
    adv = sum(2.0 * s / h for s, h in zip(speeds, grid.h))
    if scheme == "imex":
        return math.inf if adv == 0 else 1.0 / adv
    diff = sum(2.0 / (h * h) for h in grid.h)
    return 1.0 / max(diff + adv, diff + 1.0)


def _cg_solve(matrix, rhs: np.ndarray, alpha: float, x0: np.ndarray) -> np.ndarray:
    """Solve (alpha I - dt L) x = rhs.

    Constants are an eigenvector with eigenvalue alpha, so the mean is set
    exactly and CG only sees the mean-free part; mass is then exact.
    """
    mean = rhs.mean() / alpha
    b = rhs - rhs.mean()
    guess = x0 - x0.mean()
    y, info = cg(matrix, b, x0=guess, rtol=CG_RTOL, atol=0.0, maxiter=10 * b.size)
    if info != 0:
        raise RuntimeError(f"CG did not converge (info={info})")
    return y - y.mean() + mean


class Stepper:
    """Advances a ``State`` by one step of the configured scheme."""

    def __init__(self, grid: Grid, p: ModelParams, cfg: SolverConfig):
        self.grid = grid
        self.p = p
        self.cfg = cfg
        self._imex_cache: dict[float, tuple] = {}
        self._limit: tuple = (None, 0.0)  # (state, limit) of the last query

    def limit(self, state: State) -> float:
        if self._limit[0] is not state:
            self._limit = (state, stability_limit(self.grid, state, self.p, self.cfg.scheme))
        return self._limit[1]

    def stable_dt(self, state: State) -> float:
        return self.cfg.cfl_safety * self.limit(state)

    def _imex_matrices(self, dt: float):
        if dt not in self._imex_cache:
            lap = self.grid.laplacian_matrix
            eye = identity(lap.shape[0], format="csr")
            if len(self._imex_cache) > 4:
                self._imex_cache.clear()
            self._imex_cache[dt] = ((eye - dt * lap).tocsr(), ((1.0 + dt) * eye - dt * lap).tocsr())
        return self._imex_cache[dt]

    def step(self, state: State, dt: Optional[float] = None) -> State:
        grid, p, cfg = self.grid, self.p, self.cfg
        _check_positive(state)
        limit = self.limit(state)
        if dt is None:
            dt = min(cfg.dt_max, cfg.cfl_safety * limit)
        if dt > limit * (1 + 1e-12):
            raise StabilityError(f"dt={dt:.3e} exceeds stability limit {limit:.3e}", state.t)
        u, v = state.u, state.v
        src = saturate(u, p.k)
        if cfg.scheme == "explicit":
            flux = chemotactic_flux(grid, state, p, cfg.flux)
            u_new = u + dt * grid.div_flux_neumann(flux)
            v_new = v + dt * (grid.laplacian_neumann(v) - v + src)
        else:
            mu, mv = self._imex_matrices(dt)
            adv = advective_flux(grid, state, p, cfg.flux)
            rhs_u = u + dt * grid.div_flux_neumann(adv)
            u_new = _cg_solve(mu, rhs_u.ravel(), 1.0, u.ravel()).reshape(grid.shape)
            rhs_v = v + dt * src
            v_new = _cg_solve(mv, rhs_v.ravel(), 1.0 + dt, v.ravel()).reshape(grid.shape)
        new = State(state.t + dt, u_new, v_new)
        _check_positive(new, "after step")
        return new


def step(grid: Grid, state: State, p: ModelParams, cfg: SolverConfig,
         dt: Optional[float] = None) -> State:
    return Stepper(grid, p, cfg).step(state, dt)


@dataclass
class Trajectory:
    """Snapshots of one run, in time order; read-only once ``run`` returns."""

    grid: Grid
    params: ModelParams
    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: int = 0

    def append(self, state: State):
        self.times.append(state.t)
        self.u.append(state.u.copy())
        self.v.append(state.v.copy())

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> State:
        return State(self.times[i], self.u[i], self.v[i])

    @property
    def horizon(self) -> float:
        return self.times[-1]


def run(grid: Grid, u0: np.ndarray, v0: np.ndarray, p: ModelParams, cfg: SolverConfig,
        sink: Optional[Callable] = None, stride: int = 1,
        snapshot_stride: Optional[int] = 1) -> Trajectory:
    """Regularise the data, integrate to ``cfg.t_end`` and return the trajectory.

    ``sink(state)`` is called for the initial state, every ``stride`` steps and
    at the final time; snapshots are kept every ``snapshot_stride`` steps (and
    at the end) unless it is None.
    """
    from .diagnostics import DiagnosticsMonitor

    uk, vk = regularize_initial_data(u0, v0, p)
    state = State(0.0, uk, vk)
    _check_positive(state, "initial data")
    stepper = Stepper(grid, p, cfg)
    traj = Trajectory(grid, p)
    monitor = DiagnosticsMonitor(grid, p, state)

    def emit(st, n):
        if snapshot_stride is not None and (n % snapshot_stride == 0 or st.t >= cfg.t_end):
            traj.append(st)
        if n % stride == 0 or st.t >= cfg.t_end:
            rec = monitor.record(st)
            traj.records.append(rec)
            if sink is not None:
                sink(rec)

    n = 0
    emit(state, n)
    while state.t < cfg.t_end:
        dt = min(cfg.dt_max, stepper.stable_dt(state))
        remaining = cfg.t_end - state.t
        if dt >= remaining * (1 - 1e-9):
            dt = remaining
        state = stepper.step(state, dt)
        if dt == remaining:
            state.t = cfg.t_end
        n += 1
        emit(state, n)
    traj.steps = n
    logger.debug("run finished: %d steps to t=%g", n, state.t)
    return traj


def replace_config(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)
