"""Energy-stability certificates for the block scheme.

Each cell interface contributes a quadratic form Theta in the four nodal
values of the two cells sharing it; the scheme is stable when every such
form is non-positive. The forms here are the closed-form 4x4 matrices; an
independent evaluation from the flux/penalty definition is provided as an
oracle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dg_equiv import PenaltyCoefficients


@dataclass(frozen=True)
class ThetaMatrix:
    M: np.ndarray
    kind: str  # "interior" | "boundary"
    h: float

    @property
    def reduced(self) -> np.ndarray:
        """Leading 3x3 block; the last row/column is dependent on the others."""
        return self.M[:3, :3]

    def quadratic_form(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.M @ x)


def theta_interior(c: float, h: float = 1.0) -> ThetaMatrix:
    a = 8 * c - 19
    b = (71 - 40 * c) / 3
    d = 8 * c - 5
    e = (1 - 8 * c) / 3
    f = (56 * c - 169) / 3
    g = (113 - 40 * c) / 3
    M = np.array(
        [
            [a, b, d, e],
            [b, f, g, d],
            [d, g, f, b],
            [e, d, b, a],
        ]
    ) / (12 * h)
    return ThetaMatrix(M, "interior", h)


def theta_boundary(c: float, h: float = 1.0) -> ThetaMatrix:
    """Form at the interface between the first and second cell of a Dirichlet grid."""
    a = 3 * (8 * c - 19)
    b = 71 - 40 * c
    d = (8 * c - 7) / 2
    e = (1 - 8 * c) / 2
    f = 56 * c - 169
    g = (113 - 40 * c) / 2
    k = (40 * c - 23) / 2
    M = np.array(
        [
            [a, b, d, e],
            [b, f, g, k],
            [d, g, f, b],
            [e, k, b, a],
        ]
    ) / (36 * h)
    return ThetaMatrix(M, "boundary", h)


def _interface_traces(x, h):
    x = np.asarray(x, dtype=float)
    u_m = -0.5 * x[0] + 1.5 * x[1]
    ux_m = 2.0 / h * (x[1] - x[0])
    u_p = 1.5 * x[2] - 0.5 * x[3]
    ux_p = 2.0 / h * (x[3] - x[2])
    return u_m, ux_m, u_p, ux_p


def theta_from_definition(x, coeffs: PenaltyCoefficients, h: float, kind: str = "interior") -> float:
    """Evaluate Theta directly from fluxes, penalties and the two cell integrals.

    ``x`` holds the nodal values of the cell left of the interface followed by
    those of the cell on its right. For ``kind="boundary"`` the left cell is
    the first cell of a Dirichlet grid: its right flux is one-sided and its
    penalties act on its own trace rather than on the jump.
    """
    k = {name: float(getattr(coeffs, name)) for name in ("C1", "C2", "D1", "D2", "E1", "E2", "F1", "F2", "alpha", "beta")}
    u_m, ux_m, u_p, ux_p = _interface_traces(x, h)
    jump, jump_x = u_p - u_m, ux_p - ux_m
    flux_right_cell = k["beta"] * ux_m + (1 - k["beta"]) * ux_p
    if kind == "interior":
        flux_left_cell = k["alpha"] * ux_m + (1 - k["alpha"]) * ux_p
        pen_left_cell = k["C1"] / h * jump + k["C2"] * jump_x
        dpen_left_cell = k["E1"] * jump + h * k["E2"] * jump_x
    elif kind == "boundary":
        flux_left_cell = ux_m
        pen_left_cell = -k["C1"] / h * u_m - k["C2"] * ux_m
        dpen_left_cell = -k["E1"] * u_m - h * k["E2"] * ux_m
    else:
        raise ValueError(f"unknown kind {kind!r}")
    val = flux_left_cell * u_m - flux_right_cell * u_p
    val += pen_left_cell * u_m - (k["D1"] / h * jump + k["D2"] * jump_x) * u_p
    val += dpen_left_cell * ux_m - (k["F1"] * jump + h * k["F2"] * jump_x) * ux_p
    # -1/2 of the integral of u_x^2 over each cell (u_x is constant per cell)
    val -= 0.5 * h * ux_m**2 + 0.5 * h * ux_p**2
    return float(val)


def boundary_theta_coefficients(c: float, beta: float = 0.5) -> PenaltyCoefficients:
    return PenaltyCoefficients(
        C1=7 / 3,
        C2=0.5,
        D1=7 / 3,
        D2=beta - 0.5,
        E1=-(8 * c + 5) / 18,
        E2=-(c + 1) / 18,
        F1=(8 * c + 5) / 18,
        F2=-(c + 1) / 18,
        alpha=1.0,
        beta=beta,
    )


def theta_matrix_from_definition(coeffs: PenaltyCoefficients, h: float, kind: str = "interior") -> np.ndarray:
    """Symmetric matrix of the form, recovered by polarization."""
    eye = np.eye(4)
    M = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            plus = theta_from_definition(eye[i] + eye[j], coeffs, h, kind)
            minus = theta_from_definition(eye[i] - eye[j], coeffs, h, kind)
            M[i, j] = (plus - minus) / 4
    return M


def closed_form_diagonal(c: float) -> np.ndarray:
    """Congruent diagonal of ``12 h M'`` (Sylvester inertia witness)."""
    q = 2 * c * (8 * c + 49) - 287
    return np.array(
        [
            8 * c - 19,
            -16 / 9 * (8 * c - 19) * q,
            16384 / 243 * (19 - 8 * c) ** 4 * (2 * c - 7) * (2 * c * (2 * c + 7) - 35) * q,
        ]
    )


def inertia(values, tol: float) -> tuple[int, int, int]:
    """Counts of (negative, zero, positive) entries with a zero band of ``tol``."""
    v = np.asarray(values)
    return int(np.sum(v < -tol)), int(np.sum(np.abs(v) <= tol)), int(np.sum(v > tol))


@dataclass
class CertificateRow:
    c: float
    max_eig_interior: float
    max_eig_boundary: float
    diagonal: np.ndarray
    inertia_reduced: tuple
    inertia_diagonal: tuple
    rank_full: int
    rank_reduced: int
    in_proven_range: bool
    tol: float

    @property
    def eig_ok(self) -> bool:
        return self.max_eig_interior <= self.tol

    @property
    def boundary_ok(self) -> bool:
        return self.max_eig_boundary <= self.tol

    @property
    def diagonal_ok(self) -> bool:
        return bool(np.all(self.diagonal <= 0))

    @property
    def inertia_ok(self) -> bool:
        return self.inertia_reduced == self.inertia_diagonal

    @property
    def rank_ok(self) -> bool:
        return self.rank_full == self.rank_reduced

    @property
    def passed(self) -> bool:
        return self.eig_ok and self.boundary_ok and self.diagonal_ok and self.inertia_ok and self.rank_ok


@dataclass
class CertificationReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["c", "max_eig_interior", "max_eig_boundary", "d1", "d2", "d3", "inertia_ok", "rank_ok", "passed"]
        )
        for r in self.rows:
            w.writerow(
                [
                    repr(r.c),
                    repr(r.max_eig_interior),
                    repr(r.max_eig_boundary),
                    *(repr(float(x)) for x in r.diagonal),
                    r.inertia_ok,
                    r.rank_ok,
                    r.passed,
                ]
            )
        return buf.getvalue()


def certify_interior(c_samples, tol: float = 1e-10) -> CertificationReport:
    """Check every sampled ``c``: reduced interior form, boundary form, closed-form diagonal.

    Matrices are scaled to ``12h M`` and ``36h M`` so the entries are O(1).
    Samples outside ``[-1, 1]`` are evaluated and reported, never raised.
    """
    report = CertificationReport()
    for c in np.asarray(c_samples, dtype=float):
        Mi = theta_interior(c, 1 / 12).M
        Mr = Mi[:3, :3]
        eig_r = np.linalg.eigvalsh(Mr)
        Mb = theta_boundary(c, 1 / 36).M
        eig_b = np.linalg.eigvalsh(Mb)
        D = closed_form_diagonal(c)
        report.rows.append(
            CertificateRow(
                c=float(c),
                max_eig_interior=float(eig_r.max()),
                max_eig_boundary=float(eig_b.max()),
                diagonal=D,
                inertia_reduced=inertia(eig_r, tol),
                inertia_diagonal=inertia(D, tol),
                rank_full=int(np.linalg.matrix_rank(Mi, tol=1e-9)),
                rank_reduced=int(np.linalg.matrix_rank(Mr, tol=1e-9)),
                in_proven_range=bool(abs(c) <= 1),
                tol=tol,
            )
        )
    return report


@dataclass
class EnergyReport:
    max_rayleigh: float
    max_symmetric_eig: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rayleigh <= self.tol and self.max_symmetric_eig <= self.tol


def semidiscrete_energy_check(op, trials: int = 100, tol: float = 1e-10, seed: int = 0) -> EnergyReport:
    """Check ``u^T (Q + Q^T) u <= tol |u|^2`` on random vectors and by eigensolve."""
    from .operator import assemble_dense

    if not op.grid.periodic:
        raise ValueError("energy check is defined for periodic operators")
    Q, _ = assemble_dense(op)
    S = Q + Q.T
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((trials, Q.shape[0]))
    quad = np.einsum("ij,jk,ik->i", U, S, U) / np.einsum("ij,ij->i", U, U)
    return EnergyReport(float(quad.max()), float(np.linalg.eigvalsh(S / 2).max()), tol)
