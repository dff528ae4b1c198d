"""Admissibility analysis for the exponents (a, b) of the coupled quantity u^-a v^-b.

Everything here is closed form and side-effect free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


@dataclass(frozen=True)
class ModelParams:
    chi: float
    a: float
    b: float
    n: int = 1
    k: float = 8.0

    def __post_init__(self):
        if not (self.chi > 0 and self.a > 0 and self.b > 0):
            raise DomainError(f"chi, a, b must be positive (got {self.chi}, {self.a}, {self.b})")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be an integer >= 1 (got {self.n})")
        if not (math.isfinite(self.k) and self.k >= 2):
            raise DomainError(f"k must be a finite real >= 2 (got {self.k})")

    def with_(self, **changes) -> "ModelParams":
        fields = dict(chi=self.chi, a=self.a, b=self.b, n=self.n, k=self.k)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class AdmissibilityReport:
    b_plus: float
    b_minus: float
    discriminant: float
    coercivity: float
    admissible: bool
    frontier: bool


def _check_a_chi(a, chi):
    if not a > 0:
        raise DomainError(f"a must be positive (got {a})")
    if not chi >= 0:
        raise DomainError(f"chi must be non-negative (got {chi})")


def b_plus(a: float, chi: float) -> float:
    """Frontier ((1+a)/2)(sqrt(1+chi^2 a) - 1); admissible exponents have b above it."""
    _check_a_chi(a, chi)
    x = chi * chi * a
    # sqrt(1+x) - 1 without cancellation for small x
    return 0.5 * (1.0 + a) * x / (math.sqrt(1.0 + x) + 1.0)


def b_minus(a: float, chi: float) -> float:
    """Negative second root of the discriminant; used only to classify b."""
    _check_a_chi(a, chi)
    return -0.5 * (1.0 + a) * (math.sqrt(1.0 + chi * chi * a) + 1.0)


def discriminant_value(chi: float, a: float, b: float) -> float:
    """chi^2 (a+1)^2 / 4 - (b+a+1) b / a, valid for any real b."""
    return 0.25 * chi * chi * (a + 1.0) ** 2 - (b + a + 1.0) * b / a


def discriminant_expanded(chi: float, a: float, b: float) -> float:
    """Same quantity as ``discriminant_value`` written as c2^2 - c1*c3."""
    c1 = (a + 1.0) / a
    c2 = b / a + 0.5 * chi * (a + 1.0)
    c3 = b * b / a + b + chi * b
    return c2 * c2 - c1 * c3


def discriminant(p: ModelParams) -> float:
    return discriminant_value(p.chi, p.a, p.b)


def discriminant_scale(chi: float, a: float, b: float) -> float:
    """Sum of the magnitudes of every term in the discriminant; rounding is relative to it."""
    return 0.25 * chi * chi * (a + 1.0) ** 2 + (abs(b) + a + 1.0) * abs(b) / a


def coercivity_matrix_value(chi: float, a: float, b: float) -> np.ndarray:
    """Symmetric M with Q(U, V) = [U V] M [U V]^T componentwise; chi = 0 allowed."""
    off = 2.0 * (b / a + 0.5 * chi * (a + 1.0))
    return np.array([[4.0 * (a + 1.0) / a, off],
                     [off, b * b / a + b + chi * b]])


def coercivity_value(chi: float, a: float, b: float) -> float:
    """Smallest eigenvalue of the coercivity matrix.

    Computed as det/lambda_max with det = -4 * discriminant, so its sign
    matches the discriminant test exactly.
    """
    m = coercivity_matrix_value(chi, a, b)
    tr = m[0, 0] + m[1, 1]
    lam_max = 0.5 * (tr + math.hypot(m[0, 0] - m[1, 1], 2.0 * m[0, 1]))
    return -4.0 * discriminant_value(chi, a, b) / lam_max


def coercivity_matrix(p: ModelParams) -> np.ndarray:
    return coercivity_matrix_value(p.chi, p.a, p.b)


def coercivity_constant(p: ModelParams) -> float:
    return coercivity_value(p.chi, p.a, p.b)


def q_eval(p: ModelParams, U, V) -> float:
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape:
        raise DomainError(f"U and V must have the same shape ({U.shape} vs {V.shape})")
    a, b, chi = p.a, p.b, p.chi
    return float(4.0 * ((a + 1.0) / a * np.dot(U, U)
                        + (b / a + 0.5 * chi * (a + 1.0)) * np.dot(U, V)
                        + 0.25 * (b * b / a + b + chi * b) * np.dot(V, V)))


def chi_threshold_global(n: int) -> float:
    """Largest chi covered by the older global generalised-solution condition (inf for n=2)."""
    if n < 2:
        raise DomainError(f"threshold defined for n >= 2 only (got {n})")
    if n == 2:
        return math.inf
    if n == 3:
        return math.sqrt(8.0)
    return n / (n - 2.0)


def classify_b(chi: float, a: float, b: float, rel_tol: float = 1e-12) -> str:
    """One of 'admissible', 'frontier', 'lower-branch', 'inadmissible' for any real b."""
    d = discriminant_value(chi, a, b)
    if abs(d) <= rel_tol * discriminant_scale(chi, a, b):
        return "frontier"
    if d < 0:
        return "admissible" if b > 0 else "lower-branch"
    return "inadmissible"


def admissibility(p: ModelParams, rel_tol: float = 1e-12) -> AdmissibilityReport:
    d = discriminant(p)
    frontier = abs(d) <= rel_tol * discriminant_scale(p.chi, p.a, p.b)
    return AdmissibilityReport(
        b_plus=b_plus(p.a, p.chi),
        b_minus=b_minus(p.a, p.chi),
        discriminant=d,
        coercivity=coercivity_constant(p),
        admissible=(d < 0) and not frontier,
        frontier=frontier,
    )
