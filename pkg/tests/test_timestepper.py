import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from eisbfd.grid import build_grid_1d, build_grid_2d
from eisbfd.operator import BoundaryData, SpatialOperator
from eisbfd.timestepper import (
    RK4,
    RK6,
    DivergenceError,
    StabilityBoundError,
    TimeGrid,
    integrate,
    integrate_scalar,
    order_residuals,
    rooted_trees,
    spectral_radius_estimate,
    stable_dt,
    step_matrices,
)


def test_tree_counts():
    # number of rooted trees of each order: 1, 1, 2, 4, 9, 20
    counts = [len(rooted_trees(k)) for k in range(1, 7)]
    assert counts == [1, 1, 2, 4, 9, 20]


@pytest.mark.parametrize("scheme", [RK6, RK4])
def test_order_conditions(scheme):
    res = order_residuals(scheme.a, scheme.b, scheme.order)
    assert max(abs(r[-1]) for r in res) < 1e-13
    assert np.allclose(scheme.a.sum(axis=1), scheme.c_nodes)


def test_rk6_is_not_seventh_order():
    assert max(abs(r[-1]) for r in order_residuals(RK6.a, RK6.b, 7)) > 1e-6


@pytest.mark.parametrize("scheme, expected", [(RK6, 6), (RK4, 4)])
def test_observed_order_on_nonlinear_scalar(scheme, expected):
    # y' = -y^2, y(0) = 1  ->  y = 1 / (1 + t)
    errs = [abs(integrate_scalar(lambda t, y: -(y**2), 1.0, 2.0, dt, scheme) - 1 / 3) for dt in (0.2, 0.1)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(expected, abs=0.4)


def test_stability_function_matches_taylor_for_rk4():
    z = np.array([-0.5, -1.0 + 0.5j])
    assert np.allclose(RK4.stability_function(z), 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)


@pytest.mark.parametrize("scheme", [RK6, RK4])
def test_real_stability_length_is_a_boundary(scheme):
    x = scheme.real_stability_length
    assert abs(scheme.stability_function(-x * 0.999)) <= 1
    assert abs(scheme.stability_function(-x * 1.001)) > 1


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-1, 1), periodic=st.booleans(), n=st.integers(3, 14))
def test_stable_dt_covers_spectrum(c, periodic, n):
    g = build_grid_1d(n, 1.0, periodic)
    op = SpatialOperator(g, c, None if periodic else BoundaryData.homogeneous(1))
    lam = np.linalg.eigvals(op.linear_matrix().toarray())
    assert np.max(np.abs(lam)) <= spectral_radius_estimate(op) * (1 + 1e-9)
    assert np.max(np.abs(lam.imag)) <= 1e-9 * np.max(np.abs(lam))
    dt = stable_dt(op, 1.0)
    assert np.max(np.abs(RK6.stability_function(dt * lam))) <= 1 + 1e-9


def test_dirichlet_margin_covers_large_grids():
    from eisbfd.timestepper import DIRICHLET_MARGIN, _radius_1d

    for c in (-1.0, 0.0, 0.5, 1.0):
        assert _radius_1d(200, 1.0, c, False) <= DIRICHLET_MARGIN * _radius_1d(200, 1.0, c, True)


def test_stable_dt_scaling():
    a = stable_dt(SpatialOperator(build_grid_1d(10, 1.0), 0.0))
    b = stable_dt(SpatialOperator(build_grid_1d(20, 1.0), 0.0))
    c2 = stable_dt(SpatialOperator(build_grid_2d(10, 1.0), 0.0))
    assert a / b == pytest.approx(4.0)
    assert a / c2 == pytest.approx(2.0)
    with pytest.raises(ValueError):
        stable_dt(SpatialOperator(build_grid_1d(10, 1.0), 0.0), 1.5)


def test_time_grid_lands_on_final_time():
    tg = TimeGrid.covering(1.0, 0.3)
    assert tg.steps == 4 and tg.dt * tg.steps == pytest.approx(1.0)


def test_zero_operator_integrates_forcing_exactly():
    # Q annihilates constants, so v' = t^5 from v = 1 gives 1 + t^6/6 (RK6 exact on degree 5)
    g = build_grid_1d(4, 1.0)
    op = SpatialOperator(g, 0.0)
    v = integrate(op, np.ones(8), lambda ts: np.repeat(ts[:, None] ** 5, 8, axis=1), t_final=0.5, dt=1e-3)
    assert np.allclose(v, 1 + 0.5**6 / 6, rtol=0, atol=1e-13)


@pytest.mark.parametrize("method", ["stages", "propagator"])
def test_matches_matrix_exponential(method):
    g = build_grid_1d(12, 2 * np.pi)
    op = SpatialOperator(g, -4 / 13)
    v0 = np.exp(np.cos(g.nodes))
    ref = scipy.linalg.expm(0.01 * op.linear_matrix().toarray()) @ v0
    v = integrate(op, v0, t_final=0.01, dt=1e-4, method=method)
    assert np.max(np.abs(v - ref)) < 1e-12
    # at the default step the stiff modes carry an O(dt^6) error only
    assert np.max(np.abs(integrate(op, v0, t_final=0.01, method=method) - ref)) < 1e-7


def test_paths_agree_with_sources():
    g = build_grid_1d(6, 1.0, periodic=False)
    op = SpatialOperator(g, 0.2, BoundaryData.homogeneous(1))
    f = lambda ts: np.sin(np.outer(1 + ts, g.nodes))  # noqa: E731
    a = integrate(op, np.cos(g.nodes), f, t_final=0.1, method="stages")
    b = integrate(op, np.cos(g.nodes), f, t_final=0.1, method="propagator")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-13)


def test_step_matrices_reduce_to_stability_polynomial():
    Q = np.array([[-3.0]])
    P, S, nodes = step_matrices(Q, 0.1)
    assert P[0, 0] == pytest.approx(RK6.stability_function(-0.3).real)
    assert S.shape == (1, len(nodes))


def test_too_large_dt_is_refused_and_divergence_reported():
    g = build_grid_1d(8, 1.0)
    op = SpatialOperator(g, 0.0)
    big = 3 * stable_dt(op, 1.0)
    with pytest.raises(StabilityBoundError) as info:
        integrate(op, np.cos(2 * np.pi * g.nodes), dt=big)
    assert info.value.suggested_dt < big
    rng = np.random.default_rng(0)
    with pytest.raises(DivergenceError):
        integrate(op, rng.normal(size=16), t_final=50.0, dt=big, allow_unstable_dt=True, method="stages")
