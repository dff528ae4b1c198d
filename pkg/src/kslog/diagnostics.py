"""Functionals monitored along a run: masses, the energy of u^-a v^-b, its
three dissipation channels, the saturation defect, and post-hoc checks."""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .grid import Grid
from .params import ModelParams, coercivity_constant
from .solver import PositivityError, State

CSV_HEADER = ("t", "mass_u", "mass_v", "min_u", "min_v", "max_u", "max_v", "energy",
              "diss_grad", "diss_cross", "diss_react", "defect", "gronwall_bound")


def fmt(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_u: float
    mass_v: float
    min_u: float
    min_v: float
    max_u: float
    max_v: float
    energy: float
    diss_grad: float
    diss_cross: float
    diss_react: float
    defect: float
    gronwall_bound: float

    def row(self) -> list[str]:
        return [fmt(x) for x in astuple(self)]


def _require_positive(state: State):
    if float(state.u.min()) <= 0 or float(state.v.min()) <= 0:
        raise PositivityError("diagnostics need u > 0 and v > 0", state.t)


def energy(grid: Grid, state: State, p: ModelParams) -> float:
    _require_positive(state)
    return grid.integrate(state.u ** (-p.a) * state.v ** (-p.b))


def composite_faces(grid: Grid, state: State, p: ModelParams):
    """Face values of U = grad(u^-a/2 v^-b/2) and V = u^-a/2 v^-b/2-1 grad v.

    U is a face difference of the composite field; the prefactor of V is the
    mean of the two neighbouring cells.
    """
    w = state.u ** (-0.5 * p.a) * state.v ** (-0.5 * p.b)
    U = grid.gradient_faces(w)
    gv = grid.gradient_faces(state.v)
    pref = grid.face_average(w / state.v)
    V = tuple(c * g for c, g in zip(pref, gv))
    return U, V


def dissipation_terms(grid: Grid, state: State, p: ModelParams) -> tuple[float, float, float]:
    """(||U||^2, ||V||^2, int u^(1-a) v^(-b-1) / (1 + u/k)) at one instant."""
    _require_positive(state)
    U, V = composite_faces(grid, state, p)
    d_grad = grid.integrate_faces(tuple(g * g for g in U))
    d_cross = grid.integrate_faces(tuple(g * g for g in V))
    react = state.u ** (1.0 - p.a) * state.v ** (-p.b - 1.0) / (1.0 + state.u / p.k)
    return d_grad, d_cross, grid.integrate(react)


def defect_density(u: np.ndarray, k: float) -> np.ndarray:
    """u - u/(1+u/k), written as u^2/(k+u)."""
    return u * u / (k + u)


def defect(grid: Grid, state: State, p: ModelParams) -> float:
    return grid.integrate(defect_density(state.u, p.k))


def _growth(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


class DiagnosticsMonitor:
    """Builds records relative to the initial energy of a run."""

    def __init__(self, grid: Grid, p: ModelParams, initial: State):
        self.grid = grid
        self.p = p
        self.energy0 = energy(grid, initial, p)

    def record(self, state: State) -> DiagnosticsRecord:
        g, p = self.grid, self.p
        d_grad, d_cross, d_react = dissipation_terms(g, state, p)
        return DiagnosticsRecord(
            t=state.t,
            mass_u=g.integrate(state.u),
            mass_v=g.integrate(state.v),
            min_u=float(state.u.min()),
            min_v=float(state.v.min()),
            max_u=float(state.u.max()),
            max_v=float(state.v.max()),
            energy=energy(g, state, p),
            diss_grad=d_grad,
            diss_cross=d_cross,
            diss_react=d_react,
            defect=defect(g, state, p),
            gronwall_bound=_growth(p.b * state.t) * self.energy0,
        )


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def read_csv(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected diagnostics header")
    return [DiagnosticsRecord(*map(float, row)) for row in rows[1:]]


def time_weights(times) -> np.ndarray:
    """Left-rectangle weights: record j carries t_{j+1} - t_j, the last one 0."""
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    w[:-1] = np.diff(t)
    return w


def defect_integral(records) -> float:
    w = time_weights([r.t for r in records])
    return float(np.dot(w, [r.defect for r in records]))


@dataclass(frozen=True)
class GronwallReport:
    violation: float  # max_j max(0, (lhs_j - bound_j) / bound_j)
    final_margin: float  # (bound - lhs) / bound at the last record
    worst_time: float
    passed: bool
    lhs: tuple
    bound: tuple


def gronwall_check(records, p: ModelParams, tol: float = 1e-2) -> GronwallReport:
    """Energy plus accumulated dissipation against exp(bt) E(0), per record.

    Dissipation integrals use left rectangles on the record times, weighted
    by the coercivity constant for the two gradient channels and by b for
    the reaction channel.
    """
    if not records:
        raise ValueError("gronwall_check needs at least one record")
    c_low = coercivity_constant(p)
    w = time_weights([r.t for r in records])
    acc = 0.0
    lhs, bound = [], []
    for r, wj in zip(records, w):
        lhs.append(r.energy + acc)
        bound.append(r.gronwall_bound)
        acc += wj * (c_low * (r.diss_grad + r.diss_cross) + p.b * r.diss_react)
    lhs_a, bound_a = np.array(lhs), np.array(bound)
    rel = (lhs_a - bound_a) / bound_a
    j = int(np.argmax(rel))
    violation = max(0.0, float(rel[j]))
    return GronwallReport(violation, float(-rel[-1]), records[j].t, violation <= tol,
                          tuple(lhs), tuple(bound))


@dataclass(frozen=True)
class MassControlReport:
    lhs: float
    rhs: float
    slack: float  # rhs - lhs
    scale: float


def mass_control_check(records, psi, p: ModelParams, mass0: float | None = None) -> MassControlReport:
    """Mass control with the saturation defect standing in for the measure.

    LHS = sum_j psi(t_j) [int sat(u) + defect] dt_j and RHS = ||u_k0||_1 ||psi||_1,
    both with the same left-rectangle weights.  The saturated mass is taken
    as mass_u - defect, so records with the defect zeroed reduce LHS to the
    psi-weighted mass of u.
    """
    if not records:
        raise ValueError("mass_control_check needs at least one record")
    times = np.array([r.t for r in records])
    psi.check_support(times[-1])
    w = time_weights(times)
    vals = psi.value(times)
    if mass0 is None:
        mass0 = records[0].mass_u
    sat_mass = np.array([r.mass_u - r.defect for r in records])
    dfc = np.array([r.defect for r in records])
    lhs = float(np.sum(w * vals * (sat_mass + dfc)))
    rhs = mass0 * float(np.sum(w * np.abs(vals)))
    scale = max(abs(rhs), abs(lhs), 1e-300)
    return MassControlReport(lhs, rhs, rhs - lhs, scale)


def field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(DiagnosticsRecord))


def key_identity_residual(grid: Grid, before: State, after: State, p: ModelParams) -> np.ndarray:
    """Cellwise defect of the evolution identity for F = u^-a v^-b over one step.

    (F(after) - F(before))/dt is compared with
    -Q(U, V) + div(grad F + chi a u^-a v^-b-1 grad v) + b F - b u^(1-a) v^(-b-1)/(1+u/k),
    all evaluated at ``before``; face quantities are averaged to cells.
    """
    a, b, chi, k = p.a, p.b, p.chi, p.k
    dt = after.t - before.t
    if not dt > 0:
        raise ValueError("states must be strictly ordered in time")
    u, v = before.u, before.v
    F0 = u ** (-a) * v ** (-b)
    F1 = after.u ** (-a) * after.v ** (-b)
    U, V = composite_faces(grid, before, p)
    c1 = 4.0 * (a + 1.0) / a
    c2 = 4.0 * (b / a + 0.5 * chi * (a + 1.0))
    c3 = b * b / a + b + chi * b
    q = grid.faces_to_cells(tuple(c1 * x * x + c2 * x * y + c3 * y * y for x, y in zip(U, V)))
    gv = grid.gradient_faces(v)
    pref = grid.face_average(F0 / v)
    G = tuple(gf + chi * a * pr * g for gf, pr, g in zip(grid.gradient_faces(F0), pref, gv))
    react = b * F0 - b * u ** (1.0 - a) * v ** (-b - 1.0) / (1.0 + u / k)
    return (F1 - F0) / dt - (-q + grid.div_flux(G) + react)
