from fractions import Fraction

import numpy as np
import pytest

from eisbfd.grid import build_grid_1d
from eisbfd.operator import SpatialOperator
from eisbfd.symbols import (
    FrequencyPair,
    all_symbols,
    compute_symbols,
    evolve_single_mode,
    node_amplitudes,
    q1_expansion,
    q2_expansion,
    scaled_low_branch_error,
    symbol_eigenproblem_numeric,
)


def dense_spectrum(n, c):
    Q = SpatialOperator(build_grid_1d(n, 2 * np.pi), c).linear_matrix().toarray()
    return np.linalg.eigvals(Q)


@pytest.mark.parametrize("n", [4, 8, 16])
@pytest.mark.parametrize("c", [0.0, -4 / 13])
def test_symbols_are_the_spectrum(n, c):
    lam = dense_spectrum(n, c)
    sym = np.sort(all_symbols(n, c))
    assert np.max(np.abs(lam.imag)) <= 1e-12 * np.max(np.abs(lam))
    assert np.allclose(np.sort(lam.real), sym, rtol=1e-9, atol=1e-9 * np.abs(sym).max())
    assert sym.max() <= 1e-10


def test_frequency_pair():
    assert FrequencyPair.of(3, 10).nu == -7
    assert FrequencyPair.of(-2, 10).nu == 8
    with pytest.raises(ValueError):
        FrequencyPair.of(6, 10)


@pytest.mark.parametrize("omega", [1, 3, 5])
def test_closed_form_matches_block_symbol(omega):
    s = compute_symbols(omega, 12, -0.4)
    num = symbol_eigenproblem_numeric(omega, 12, -0.4)
    assert np.allclose([s.q1, s.q2], num.eigenvalues.real, rtol=1e-12)


@pytest.mark.parametrize("branch", [1, 2])
def test_eigenvectors_are_eigenvectors(branch):
    n, c, omega = 10, 0.3, 2
    s = compute_symbols(omega, n, c)
    v = node_amplitudes(s, branch, n)
    Q = SpatialOperator(build_grid_1d(n, 2 * np.pi), c).linear_matrix().toarray()
    q = s.q1 if branch == 1 else s.q2
    assert np.allclose(Q @ v, q * v, atol=1e-10 * abs(q))


def test_low_branch_tracks_minus_k_squared():
    s = compute_symbols(2, 64, -4 / 13)
    h = 2 * np.pi / 64
    assert s.q1 == pytest.approx(q1_expansion(2, h, -4 / 13), rel=1e-10)
    assert s.q2 == pytest.approx(q2_expansion(2, h, -4 / 13), rel=1e-6)


@pytest.mark.parametrize("c", [0.0, -0.25, 1.0])
def test_expansion_leading_coefficient(c):
    lead = 4 + 13 * c
    a, b = scaled_low_branch_error(1e-2, c), scaled_low_branch_error(5e-3, c)
    assert b == pytest.approx(lead, rel=1e-5)
    # O(h^2) remainder: halving h quarters the deviation
    assert (a - lead) / (b - lead) == pytest.approx(4.0, rel=1e-3)
    assert (4 * b - a) / 3 == pytest.approx(lead, abs=1e-8)


def test_expansion_vanishes_for_optimal_c():
    a = scaled_low_branch_error(1e-2, Fraction(-4, 13))
    b = scaled_low_branch_error(5e-3, Fraction(-4, 13))
    assert abs(a) < 2e-5 and a / b == pytest.approx(4.0, rel=1e-3)


def test_high_precision_matches_double_at_moderate_theta():
    s = compute_symbols(5, 40, 0.3)
    th = 2 * np.pi * 5 / 40
    direct = (s.q1 + 25) * 2880 * 1.7 / (5**6 * (2 * np.pi / 40) ** 4)
    assert scaled_low_branch_error(th, 0.3) == pytest.approx(direct, rel=1e-8)


def test_single_mode_prediction_matches_dense_evolution():
    import scipy.linalg

    n, c, omega, t = 64, -0.2, 1, 0.5
    g = build_grid_1d(n, 2 * np.pi)
    Q = SpatialOperator(g, c).linear_matrix().toarray()
    v = scipy.linalg.expm(t * Q) @ (np.exp(1j * g.nodes) / np.sqrt(2 * np.pi))
    pred = evolve_single_mode(omega, n, c, t)
    # the prediction is first order in the small corrections
    assert np.max(np.abs(v - pred)) < 1e-3 * np.max(np.abs(v - np.exp(1j * g.nodes - t) / np.sqrt(2 * np.pi)))
