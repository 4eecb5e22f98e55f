"""The block scheme as a nodal p=1 discontinuous Galerkin method.

A cell carries the two linear Lagrange functions on its nodes ``x_j -/+ h/4``.
Evaluating the penalized weak form with these functions and inverting the
local mass matrix gives the nodal update ``u_t = A u_{j-1} + B u_j + C u_{j+1}``
in terms of 2x2 blocks, which is compared with the finite difference rows.

All traces of the linear basis are rational, so the weak form is evaluated
exactly: pass :class:`fractions.Fraction` inputs to get rational blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np


@dataclass(frozen=True)
class NodalBlockTriple:
    """Couplings of a cell's two nodes to the left cell, itself and the right cell."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def row_sums(self) -> np.ndarray:
        return (self.A + self.B + self.C).sum(axis=1)

    def max_abs_diff(self, other: NodalBlockTriple) -> float:
        return float(
            max(np.max(np.abs(np.asarray(getattr(self, k) - getattr(other, k), dtype=float))) for k in "ABC")
        )

    def as_float(self) -> NodalBlockTriple:
        return NodalBlockTriple(*(np.asarray(m, dtype=float) for m in (self.A, self.B, self.C)))


@dataclass(frozen=True)
class PenaltyCoefficients:
    """Jump penalties of the generalized weak form and the flux weights.

    ``C*``/``E*`` act on the right interface of a cell (against the test
    function value and derivative), ``D*``/``F*`` on the left one. Index 1
    penalizes the jump of ``u``, index 2 the jump of ``u_x``. ``alpha`` and
    ``beta`` weight the one-sided derivatives in the right and left fluxes.
    """

    C1: float = 0.0
    C2: float = 0.0
    D1: float = 0.0
    D2: float = 0.0
    E1: float = 0.0
    E2: float = 0.0
    F1: float = 0.0
    F2: float = 0.0
    alpha: float = 0.5
    beta: float = 0.5

    @classmethod
    def baumann_oden(cls) -> PenaltyCoefficients:
        """Central flux with the Baumann-Oden derivative-of-test-function penalty."""
        half = Fraction(1, 2)
        return cls(E1=half, F1=-half, alpha=half, beta=half)

    @classmethod
    def interior(cls, c, alpha=Fraction(1, 2), beta=Fraction(1, 2)) -> PenaltyCoefficients:
        """Coefficients that reproduce the block finite difference interior rows."""
        c = _num(c)
        return cls(
            C1=Fraction(7, 3),
            C2=alpha - Fraction(1, 2),
            D1=Fraction(7, 3),
            D2=beta - Fraction(1, 2),
            E1=-(8 * c + 5) / 18,
            E2=-(c + 1) / 18,
            F1=(8 * c + 5) / 18,
            F2=-(c + 1) / 18,
            alpha=alpha,
            beta=beta,
        )

    @classmethod
    def boundary(cls, c) -> PenaltyCoefficients:
        """Coefficients of the first cell next to a Dirichlet boundary."""
        c = _num(c)
        return cls(
            C1=Fraction(7, 3),
            C2=Fraction(1, 2),
            D1=Fraction(14, 3),
            D2=Fraction(0),
            E1=-(8 * c + 5) / 18,
            E2=-(c + 1) / 18,
            F1=(8 * c + 5) / 9,
            F2=Fraction(0),
            alpha=Fraction(1),
            beta=Fraction(0),
        )


def _num(x):
    return x if isinstance(x, Rational) else float(x)


def _arr(values):
    return np.array(values, dtype=object)


def _cell_traces(h):
    """Value at the left/right edge and slope of a cell's linear interpolant, per node."""
    half = Fraction(1, 2)
    left = _arr([3 * half, -half])
    right = _arr([-half, 3 * half])
    slope = _arr([-2 / h, 2 / h]) if isinstance(h, Rational) else _arr([-2.0 / h, 2.0 / h])
    return left, right, slope


def _embed(local, cell):
    """Place a 2-vector for cell ``cell`` (0: left neighbour, 1: self, 2: right) in a 6-vector."""
    out = _arr([0] * 6)
    out[2 * cell : 2 * cell + 2] = local
    return out


def local_mass_matrix(h) -> np.ndarray:
    return _arr([[7, -1], [-1, 7]]) * h / 12


def local_mass_inverse(h) -> np.ndarray:
    return _arr([[7, 1], [1, 7]]) / (4 * h)


def weak_form_rows(coeffs: PenaltyCoefficients, h) -> np.ndarray:
    """Right-hand side of the weak form for the two test functions of a cell.

    Returns a 2x6 array whose columns multiply the nodal values of the left
    neighbour, the cell itself and the right neighbour.
    """
    left, right, slope = _cell_traces(h)
    k = coeffs

    u_minus_R, u_plus_R = _embed(right, 1), _embed(left, 2)
    ux_minus_R, ux_plus_R = _embed(slope, 1), _embed(slope, 2)
    u_minus_L, u_plus_L = _embed(right, 0), _embed(left, 1)
    ux_minus_L, ux_plus_L = _embed(slope, 0), _embed(slope, 1)

    jump_R, jump_x_R = u_plus_R - u_minus_R, ux_plus_R - ux_minus_R
    jump_L, jump_x_L = u_plus_L - u_minus_L, ux_plus_L - ux_minus_L
    flux_R = k.alpha * ux_minus_R + (1 - k.alpha) * ux_plus_R
    flux_L = k.beta * ux_minus_L + (1 - k.beta) * ux_plus_L

    rows = []
    for a in range(2):
        v_R, v_L, v_x = right[a], left[a], slope[a]
        row = -h * v_x * _embed(slope, 1)
        row = row + flux_R * v_R - flux_L * v_L
        row = row + (k.C1 / h * jump_R + k.C2 * jump_x_R) * v_R
        row = row - (k.D1 / h * jump_L + k.D2 * jump_x_L) * v_L
        row = row + (k.E1 * jump_R + h * k.E2 * jump_x_R) * v_x
        row = row - (k.F1 * jump_L + h * k.F2 * jump_x_L) * v_x
        rows.append(row)
    return np.stack(rows)


def dg_blocks_from_weak_form(coeffs: PenaltyCoefficients, h, exact: bool = False) -> NodalBlockTriple:
    """Strong nodal form ``M^{-1} * (weak form)`` split into 2x2 blocks."""
    if exact and not isinstance(h, Rational):
        h = Fraction(h)
    full = local_mass_inverse(h).dot(weak_form_rows(coeffs, h))
    triple = NodalBlockTriple(full[:, 0:2], full[:, 2:4], full[:, 4:6])
    return triple if exact else triple.as_float()


def bfd_blocks_interior(c, h) -> NodalBlockTriple:
    """2x2 blocks of the finite difference interior rows (scale ``1/(3h^2)``)."""
    s = 1.0 / (3.0 * h * h)
    A = np.array([[-1 + c, 16 - 5 * c], [-c, -1 + 5 * c]], dtype=float) * s
    B = np.array([[-30 + 10 * c, 16 - 10 * c], [16 - 10 * c, -30 + 10 * c]], dtype=float) * s
    C = np.array([[-1 + 5 * c, -c], [16 - 5 * c, -1 + c]], dtype=float) * s
    return NodalBlockTriple(A, B, C)


def bfd_blocks_boundary(c, h) -> tuple[np.ndarray, np.ndarray]:
    """Self and right-neighbour blocks of the first cell of a Dirichlet grid."""
    s = 1.0 / (3.0 * h * h)
    B = np.array([[-46 + 15 * c, 17 - 11 * c], [17 - 15 * c, -30 + 11 * c]], dtype=float) * s
    C = np.array([[-1 + 5 * c, -c], [16 - 5 * c, -1 + c]], dtype=float) * s
    return B, C


def dg_blocks_boundary_cell(c, h, exact: bool = False):
    """First-cell blocks from the weak form with the boundary penalty set.

    The missing left neighbour contributes nothing to the jumps, so only the
    self and right-neighbour blocks are returned, with the coefficients used.
    """
    coeffs = PenaltyCoefficients.boundary(c)
    triple = dg_blocks_from_weak_form(coeffs, h, exact=exact)
    return triple.B, triple.C, coeffs


@dataclass
class EquivalenceCheck:
    c: float
    alpha: float
    beta: float
    max_diff: float

    @property
    def passed(self) -> bool:
        return self.max_diff <= 1e-12


def equivalence_report(c_values, flux_pairs, h: float = 1.0) -> list[EquivalenceCheck]:
    checks = []
    for c in c_values:
        ref = bfd_blocks_interior(c, h)
        for alpha, beta in flux_pairs:
            coeffs = PenaltyCoefficients.interior(c, alpha, beta)
            got = dg_blocks_from_weak_form(coeffs, h)
            scale = max(np.max(np.abs(m)) for m in (ref.A, ref.B, ref.C))
            checks.append(EquivalenceCheck(float(c), float(alpha), float(beta), ref.max_abs_diff(got) / scale))
    return checks


def baumann_oden_blocks(h) -> NodalBlockTriple:
    """The reference Baumann-Oden blocks written out directly."""
    A = np.array([[7, -1], [1, -7]], dtype=float) / (4 * h * h)
    B = np.array([[-12, 12], [12, -12]], dtype=float) / (2 * h * h)
    C = np.array([[-7, 1], [-1, 7]], dtype=float) / (4 * h * h)
    return NodalBlockTriple(A, B, C)


__all__ = [
    "NodalBlockTriple",
    "PenaltyCoefficients",
    "baumann_oden_blocks",
    "bfd_blocks_boundary",
    "bfd_blocks_interior",
    "dg_blocks_boundary_cell",
    "dg_blocks_from_weak_form",
    "equivalence_report",
    "local_mass_inverse",
    "local_mass_matrix",
    "weak_form_rows",
]
