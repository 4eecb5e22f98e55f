import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eisbfd.filters import (
    FilterSpec,
    _fit_matrix,
    apply_filter,
    interp_filter_first,
    interp_filter_second,
    savitzky_golay,
    spectral_filter,
    spectral_filter_2d,
)
from eisbfd.grid import build_grid_1d, build_grid_2d
from eisbfd.operator import Field, UnsupportedFeatureError

LOCAL = ["interp1", "interp2", "savitzky_golay"]
finite = st.floats(-1e3, 1e3, allow_nan=False)


def nodes(n):
    return build_grid_1d(n, 1.0, periodic=False).nodes


@pytest.mark.parametrize("kind", LOCAL)
@pytest.mark.parametrize("n_cells", [12, 17, 30])
def test_reproduces_degree_six(kind, n_cells):
    x = nodes(n_cells)
    p = np.polynomial.Polynomial([0.3, -1, 2, 0.5, -3, 1.2, 0.8])
    out = FilterSpec(kind).apply(p(x))
    assert np.max(np.abs(out - p(x))) <= 1e-11 * np.max(np.abs(p(x)))


@pytest.mark.parametrize("kind", ["interp1", "interp2"])
def test_degree_seven_is_not_reproduced(kind):
    x = nodes(12)
    assert np.max(np.abs(FilterSpec(kind).apply(x**7) - x**7)) > 1e-8


@pytest.mark.parametrize("kind", ["interp1", "interp2"])
def test_alternating_mode_removed(kind):
    n = 24
    alt = (-1.0) ** np.arange(2 * n)
    assert np.max(np.abs(FilterSpec(kind).apply(alt))) < 1e-12
    # the plain fit lets part of it through
    assert np.max(np.abs(FilterSpec(kind, hf_terms=0).apply(alt))) > 0.05


@settings(max_examples=30, deadline=None)
@given(
    kind=st.sampled_from(["spectral", *LOCAL]),
    u=arrays(float, 24, elements=finite),
    w=arrays(float, 24, elements=finite),
    a=finite,
    b=finite,
)
def test_linear(kind, u, w, a, b):
    f = FilterSpec(kind).apply
    lhs, rhs = f(a * u + b * w), a * f(u) + b * f(w)
    scale = 1 + np.max(np.abs(a * u)) + np.max(np.abs(b * w))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(u=arrays(float, 32, elements=finite))
def test_spectral_idempotent(u):
    once = spectral_filter(u)
    assert np.max(np.abs(spectral_filter(once) - once)) <= 1e-13 * (1 + np.max(np.abs(u)))


def test_spectral_keeps_band_and_drops_the_rest():
    g = build_grid_1d(16, 2 * np.pi)
    x = g.nodes
    low, high = np.cos(2 * x) + np.sin(8 * x), np.cos(9 * x) + np.cos(15 * x)
    assert np.allclose(spectral_filter(low + high), low, atol=1e-13)
    fu, fv = np.fft.fft(low + high), np.fft.fft(spectral_filter(low + high))
    k = np.abs(np.fft.fftfreq(32, 1 / 32))
    assert np.allclose(fu[k <= 8], fv[k <= 8], atol=1e-12)


def test_spectral_2d_matches_tensor_product():
    rng = np.random.default_rng(3)
    u = rng.normal(size=(16, 16))
    rows = np.stack([spectral_filter(r) for r in u])
    ref = np.stack([spectral_filter(col) for col in rows.T]).T
    assert np.allclose(spectral_filter_2d(u), ref, atol=1e-14)
    assert np.allclose(FilterSpec("spectral").apply(u), ref, atol=1e-14)


def test_spectral_refuses_dirichlet_field():
    g = build_grid_1d(8, 1.0, periodic=False)
    with pytest.raises(UnsupportedFeatureError):
        apply_filter(Field(np.zeros(16), g), "spectral")
    with pytest.raises(UnsupportedFeatureError):
        spectral_filter(np.zeros(15))


def test_savgol_reduces_noise():
    rng = np.random.default_rng(0)
    noise = rng.normal(size=(200, 60))
    out = savitzky_golay(noise)
    assert np.var(out[:, 5:-5]) < 0.6 * np.var(noise)


def test_savgol_centre_row_is_symmetric_and_sums_to_one():
    row = _fit_matrix(11, 6, (5,))[0]
    assert np.allclose(row, row[::-1]) and row.sum() == pytest.approx(1.0)


def test_interp1_blocks_are_independent():
    u = np.zeros(36)
    u[13] = 1.0  # inside the second block
    out = interp_filter_first(u)
    assert np.all(out[:12] == 0) and np.all(out[24:] == 0)


def test_interp1_ragged_tail_uses_last_block():
    x = nodes(15)  # 30 nodes: blocks at 0, 12 and the final 18..29
    u = np.sin(7 * x)
    out = interp_filter_first(u)
    P = _fit_matrix(12, 6, tuple(range(12)), 2)
    assert np.allclose(out[18:], P @ u[18:])


def test_interp2_window_is_local():
    u = np.zeros(40)
    u[20] = 1.0
    out = interp_filter_second(u)
    assert np.all(out[:14] == 0) and np.all(out[28:] == 0)


def test_field_round_trip_and_2d():
    g = build_grid_2d(12, 1.0, periodic=False)
    x, y = g.mesh()
    u = Field(x**3 * y**2 - x * y**5, g, 0.5)
    out = apply_filter(u, FilterSpec("interp2"))
    assert isinstance(out, Field) and out.time == 0.5
    assert np.allclose(out.values, u.values, atol=1e-12)


def test_too_few_nodes():
    with pytest.raises(UnsupportedFeatureError):
        interp_filter_first(np.zeros(10))


def test_spec_validation():
    assert FilterSpec("sg").kind == "savitzky_golay"
    with pytest.raises(ValueError):
        FilterSpec("gaussian")
    with pytest.raises(ValueError):
        FilterSpec("sg", degree=12, m=5)
