"""Pseudo-Fourier analysis of the periodic block operator.

On the 2N-node periodic grid, a low mode ``omega`` and its high partner
``nu = omega -/+ N`` span an invariant 2D subspace of Q. The two eigenvalues
there (the symbols) and the eigenvector coefficients have closed forms;
:func:`symbol_eigenproblem_numeric` obtains the same quantities from the 2x2
block symbol as an independent check.

Formulas are written for the 2*pi-periodic domain; a domain of length L is
handled by using ``h = L/N`` with integer mode index ``omega`` (physical
wavenumber ``2*pi*omega/L``), which leaves ``h*k`` unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np

from .dg_equiv import bfd_blocks_interior


@dataclass(frozen=True)
class FrequencyPair:
    omega: int
    nu: int

    @classmethod
    def of(cls, omega: int, n_cells: int) -> FrequencyPair:
        if abs(omega) * 2 > n_cells:
            raise ValueError(f"|omega| must be <= N/2, got omega={omega}, N={n_cells}")
        return cls(omega, omega - n_cells if omega > 0 else omega + n_cells)


@dataclass(frozen=True)
class SymbolPair:
    omega: int
    q1: float
    q2: float
    mu1: complex
    mu2: complex
    sigma1: complex
    sigma2: complex
    Omega: float
    Delta: float
    r1: Optional[complex]
    r2: Optional[complex]
    alpha1: complex
    beta1: complex
    alpha2: complex
    beta2: complex


def _h_and_wavenumber(omega, n_cells, length):
    h = length / n_cells
    k = 2 * np.pi * omega / length
    return h, k


def compute_mu_sigma(omega: int, n_cells: int, c: float, length: float = 2 * np.pi):
    """Diagonal actions of Q on the sampled low mode (mu) and high mode (sigma)."""
    h, k = _h_and_wavenumber(omega, n_cells, length)
    th = h * k
    s4, c4 = np.sin(th / 4), np.cos(th / 4)
    pref = 8 / (3 * h**2)
    e = np.exp(1j * th / 4)
    mu1 = pref * (-(s4**2) * (7 - np.cos(th / 2)) - 4j * c * e * s4**5)
    mu2 = pref * (-(s4**2) * (7 - np.cos(th / 2)) + 4j * c * np.conj(e) * s4**5)
    sigma1 = pref * (-(c4**2) * (7 + np.cos(th / 2)) + 4 * c * e * c4**5)
    sigma2 = pref * (-(c4**2) * (7 + np.cos(th / 2)) + 4 * c * np.conj(e) * c4**5)
    return complex(mu1), complex(mu2), complex(sigma1), complex(sigma2)


def compute_symbols(omega: int, n_cells: int, c: float, length: float = 2 * np.pi) -> SymbolPair:
    """Closed-form symbols and normalized eigenvector coefficients.

    ``q1`` is the branch approximating ``-k^2``; ``q2`` is the O(1/h^2)
    branch. The eigenvector of branch ``k`` is
    ``alpha_k e^{i omega x} + beta_k e^{i nu x}`` (up to 1/sqrt(2 pi)).
    At ``omega = 0`` the modes decouple and ``r1``/``r2`` are ``None``.
    Negative ``omega`` is obtained by conjugate symmetry.
    """
    if omega < 0:
        pos = compute_symbols(-omega, n_cells, c, length)
        conj = lambda z: None if z is None else complex(np.conj(z))  # noqa: E731
        mu1, mu2, s1, s2 = compute_mu_sigma(omega, n_cells, c, length)
        return SymbolPair(
            omega, pos.q1, pos.q2, mu1, mu2, s1, s2, pos.Omega, pos.Delta,
            conj(pos.r1), conj(pos.r2),
            conj(pos.alpha1), conj(pos.beta1), conj(pos.alpha2), conj(pos.beta2),
        )  # fmt: skip
    if 2 * omega > n_cells:
        raise ValueError(f"omega must satisfy |omega| <= N/2, got {omega} with N={n_cells}")
    h, k = _h_and_wavenumber(omega, n_cells, length)
    th = h * k
    mu1, mu2, s1, s2 = compute_mu_sigma(omega, n_cells, c, length)
    Omega = -np.cos(th / 2) * (16 - (7 + np.cos(th)) * c)
    tail = 4 * c**2 * np.sin(th / 2) ** 6
    Delta = np.sqrt(Omega**2 + tail)
    base = -(15 + np.cos(th)) + (5 + 3 * np.cos(th)) * c
    q1 = 2 / (3 * h**2) * (base + Delta)
    q2 = 2 / (3 * h**2) * (base - Delta)

    if omega == 0:
        return SymbolPair(0, q1, q2, mu1, mu2, s1, s2, Omega, Delta, None, None, 1.0, 0.0, 0.0, 1.0)

    # Omega <= 0 on |omega| <= N/2, so Omega + Delta = tail / (Delta - Omega) avoids cancellation
    gap = Delta - Omega
    r1 = 1j * (c * np.sin(th / 2) ** 6 / (4 * gap * np.sin(th / 4) * np.cos(th / 4) ** 5)) if gap > 0 else 0j
    # 1 / r2, finite also at c = 0
    inv_r2 = -1j * (16 * c * np.sin(th / 4) * np.cos(th / 4) ** 5) / (Omega - Delta) if Omega != Delta else 0j
    r2 = None if inv_r2 == 0 else 1 / inv_r2

    n1 = np.sqrt(1 + abs(r1) ** 2)
    alpha1 = 1 / n1
    beta1 = -1j * r1 / n1
    # alpha2 = i beta2 / r2, the choice that keeps i beta2 / alpha2 = r2
    n2 = np.sqrt(1 + abs(inv_r2) ** 2)
    alpha2 = 1j * inv_r2 / n2
    beta2 = 1 / n2
    return SymbolPair(
        omega, float(q1), float(q2), mu1, mu2, s1, s2, float(Omega), float(Delta),
        complex(r1), None if r2 is None else complex(r2),
        complex(alpha1), complex(beta1), complex(alpha2), complex(beta2),
    )  # fmt: skip


def block_symbol(theta: float, c: float, h: float) -> np.ndarray:
    """``A e^{-i theta} + B + C e^{i theta}`` for the block shift ``theta = h k``."""
    b = bfd_blocks_interior(c, h)
    return b.A * np.exp(-1j * theta) + b.B + b.C * np.exp(1j * theta)


@dataclass(frozen=True)
class NumericSymbol:
    omega: int
    eigenvalues: np.ndarray  # sorted descending (q1 first)
    eigenvectors: np.ndarray  # columns, per-node amplitudes over one cell


def symbol_eigenproblem_numeric(omega: int, n_cells: int, c: float, length: float = 2 * np.pi) -> NumericSymbol:
    """Eigen-decomposition of the 2x2 block symbol, independent of the closed forms."""
    h, k = _h_and_wavenumber(omega, n_cells, length)
    w, v = np.linalg.eig(block_symbol(h * k, c, h))
    order = np.argsort(-w.real)
    return NumericSymbol(omega, w[order], v[:, order])


def node_amplitudes(sym: SymbolPair, branch: int, n_cells: int, length: float = 2 * np.pi) -> np.ndarray:
    """Eigenvector ``alpha e^{i omega x} + beta e^{i nu x}`` sampled at the grid nodes (unnormalized by sqrt(2 pi))."""
    from .grid import build_grid_1d

    x = build_grid_1d(n_cells, length, True).nodes
    pair = FrequencyPair.of(sym.omega, n_cells)
    kw = 2 * np.pi / length
    a, b = (sym.alpha1, sym.beta1) if branch == 1 else (sym.alpha2, sym.beta2)
    return a * np.exp(1j * kw * pair.omega * x) + b * np.exp(1j * kw * pair.nu * x)


def all_symbols(n_cells: int, c: float, length: float = 2 * np.pi) -> np.ndarray:
    """Every symbol value, two per omega in ``(-N/2, N/2]``: the full spectrum of Q."""
    vals = []
    for omega in range(-(n_cells // 2) + (1 if n_cells % 2 == 0 else 0), n_cells // 2 + 1):
        s = compute_symbols(omega, n_cells, c, length)
        vals.extend([s.q1, s.q2])
    return np.array(vals)


def q1_expansion(omega: float, h: float, c: float) -> float:
    """Small ``h*omega`` expansion of the low branch through O(h^6)."""
    return (
        -(omega**2)
        + (4 + 13 * c) * omega**6 * h**4 / (2880 * (2 - c))
        - (4 + 38 * c + c**2) * omega**8 * h**6 / (64512 * (2 - c) ** 2)
    )


def scaled_low_branch_error(theta, c, dps: int = 60):
    """``(Q1 + omega^2) * 2880 (2 - c) / (omega^6 h^4)`` at ``h*omega = theta``, in ``dps``-digit arithmetic.

    The quantity is invariant under ``h`` for fixed ``theta``, so ``h = 1``.
    Double precision cannot resolve it for small ``theta``: ``Q1 + omega^2``
    is ``O(theta^6)`` while ``Q1`` itself carries rounding of order ``eps``.
    ``c`` may be a Fraction for an exact value. Returns a float.
    """
    with mpmath.workdps(dps):
        cm = mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
        th = mpmath.mpf(theta)
        Omega = -mpmath.cos(th / 2) * (16 - (7 + mpmath.cos(th)) * cm)
        Delta = mpmath.sqrt(Omega**2 + 4 * cm**2 * mpmath.sin(th / 2) ** 6)
        q1 = mpmath.mpf(2) / 3 * (-(15 + mpmath.cos(th)) + (5 + 3 * mpmath.cos(th)) * cm + Delta)
        return float((q1 + th**2) * 2880 * (2 - cm) / th**6)


def q2_expansion(omega: float, h: float, c: float) -> float:
    return -32 * (2 - c) / (3 * h**2) + (5 - 6 * c) * omega**2 / 3 - (1 - 3 * c) * omega**4 * h**2 / 18


def evolve_single_mode(omega: int, n_cells: int, c: float, t: float, length: float = 2 * np.pi) -> np.ndarray:
    """Predicted nodal solution at time ``t`` for initial data ``e^{i k x}/sqrt(2 pi)``.

    Valid for ``k^2 h << 1``; the caller is responsible for that regime. The
    first term carries the O(h^4 t) secular error of the low branch, the second
    the O(h^5) high-frequency component that a spectral filter removes.
    """
    from .grid import build_grid_1d

    x = build_grid_1d(n_cells, length, True).nodes
    h = length / n_cells
    k = 2 * np.pi * omega / length
    nu = FrequencyPair.of(omega, n_cells).nu
    knu = 2 * np.pi * nu / length
    decay = np.exp(-(k**2) * t)
    low = decay * (1 + (4 + 13 * c) * k**6 * h**4 * t / (2880 * (2 - c)))
    high = c * decay * (k * h) ** 5 / (1024 * (2 - c))
    return (low * np.exp(1j * k * x) + high * np.exp(1j * knu * x)) / np.sqrt(2 * np.pi)
