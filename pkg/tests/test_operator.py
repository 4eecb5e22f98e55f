import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eisbfd.grid import build_grid_1d, build_grid_2d, build_grid_3d
from eisbfd.operator import (
    BoundaryData,
    DimensionError,
    FaceTraces,
    OperatorError,
    SpatialOperator,
    UnsupportedFeatureError,
    assemble_dense,
    stencil_weights,
)

c_values = st.floats(-1.0, 1.0, allow_nan=False)


def poly_boundary(coeffs):
    """Static Dirichlet data for u = p(x) with forcing F = -p''."""
    p = np.polynomial.Polynomial(coeffs)
    d2, d4 = p.deriv(2), p.deriv(4)
    faces = {}
    for side, x0 in ((0, 0.0), (1, 1.0)):
        const = lambda v: (lambda t: v + 0.0 * np.asarray(t))  # noqa: E731
        faces[(0, side)] = FaceTraces(
            g=const(p(x0)), g_t=const(0.0), g_tt=const(0.0),
            f=const(-d2(x0)), f_t=const(0.0), f_nn=const(-d4(x0)),
        )  # fmt: skip
    return BoundaryData(faces), p


@settings(max_examples=20, deadline=None)
@given(c=c_values, coeffs=st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_ghost_closure_exact_on_quintics(c, coeffs):
    # the closure must reproduce the stencil applied to the true exterior values
    bd, p = poly_boundary(coeffs)
    g = build_grid_1d(8, 1.0, False)
    h, L = g.h, g.length
    ext = np.concatenate([[0.0], p(np.array([-3 * h / 4, -h / 4])), p(g.nodes), p(np.array([L + h / 4, L + 3 * h / 4])), [0.0]])
    wl, wr = stencil_weights(c)
    ref = np.array([(wl if i % 2 == 0 else wr) @ ext[i : i + 7] for i in range(g.n_nodes)]) / (3 * h * h)
    got = SpatialOperator(g, c, bd).apply(p(g.nodes), 0.0)
    assert np.allclose(got, ref, rtol=0, atol=1e-9 * (1 + np.max(np.abs(coeffs))))


@settings(max_examples=25, deadline=None)
@given(c=c_values, n=st.integers(3, 20))
def test_constants_in_kernel_periodic(c, n):
    op = SpatialOperator(build_grid_1d(n, 2 * np.pi), c)
    assert np.max(np.abs(op.apply(np.ones(2 * n)))) == 0.0
    # the assembled matrix stores the combined weights, rounded once
    h = 2 * np.pi / n
    assert np.max(np.abs(op.linear_matrix() @ np.ones(2 * n))) <= 1e-13 / h**2


def test_constants_in_kernel_long_double():
    op = SpatialOperator(build_grid_1d(9, 1.0), -4 / 13)
    u = np.full(18, np.longdouble(0.75))
    assert np.all(op.apply(u) == 0)


def test_constant_dirichlet_data_gives_zero():
    bd, _ = poly_boundary([2.5])
    op = SpatialOperator(build_grid_1d(8, 1.0, False), 0.3, bd)
    assert np.max(np.abs(op.apply(np.full(16, 2.5), 0.7))) < 1e-10


@pytest.mark.parametrize("c", [-1.0, -4 / 13, 0.0, 0.6])
def test_dirichlet_closure_exact_up_to_degree_four(c):
    rng = np.random.default_rng(1)
    bd, p = poly_boundary(rng.normal(size=5))
    g = build_grid_1d(10, 1.0, False)
    got = SpatialOperator(g, c, bd).apply(p(g.nodes), 0.0)
    assert np.allclose(got, p.deriv(2)(g.nodes), rtol=0, atol=1e-9)


def test_dirichlet_closure_exact_on_quintics_for_c_zero():
    # with c != 0 the fifth-difference term sees degree 5 (it vanishes at order h^4 only)
    bd, p = poly_boundary([0.3, -1.0, 2.0, 0.5, -1.5, 0.7])
    g = build_grid_1d(10, 1.0, False)
    got = SpatialOperator(g, 0.0, bd).apply(p(g.nodes), 0.0)
    assert np.allclose(got, p.deriv(2)(g.nodes), rtol=0, atol=1e-9)


@pytest.mark.parametrize("periodic", [True, False])
@pytest.mark.parametrize("c", [-1.0, -4 / 13, 0.0, 1.0])
def test_semibounded(periodic, c):
    g = build_grid_1d(12, 1.0, periodic)
    op = SpatialOperator(g, c, None if periodic else BoundaryData.homogeneous(1))
    Q = op.linear_matrix().toarray()
    top = np.linalg.eigvalsh(Q + Q.T).max()
    assert top <= 1e-12 / g.h**2


@settings(max_examples=20, deadline=None)
@given(c=c_values, seed=st.integers(0, 10**6))
def test_quadratic_form_nonpositive_random(c, seed):
    g = build_grid_2d(5, 1.0, periodic=False)
    op = SpatialOperator(g, c, BoundaryData.homogeneous(2))
    u = np.random.default_rng(seed).normal(size=g.shape)
    assert np.sum(u * op.apply_linear(u)) <= 1e-10 * np.sum(u * u) / g.h**2


@pytest.mark.parametrize("periodic", [True, False])
def test_dense_equals_sparse(periodic):
    g = build_grid_2d(4, 1.0, periodic)
    op = SpatialOperator(g, -0.2, None if periodic else BoundaryData.homogeneous(2))
    Q, b = assemble_dense(op)
    assert np.allclose(Q, op.linear_matrix().toarray(), rtol=0, atol=1e-9)
    assert np.all(b == 0)


def test_periodic_sine_second_derivative_converges():
    errs = []
    for n in (16, 32):
        g = build_grid_1d(n, 2 * np.pi)
        op = SpatialOperator(g, 0.0)
        errs.append(np.max(np.abs(op.apply(np.sin(g.nodes)) + np.sin(g.nodes))))
    assert np.log2(errs[0] / errs[1]) > 3.8


def test_3d_periodic_is_sum_of_axes():
    g = build_grid_3d(4, 2 * np.pi)
    op = SpatialOperator(g, 0.0)
    x, y, z = np.meshgrid(g.axis.nodes, g.axis.nodes, g.axis.nodes, indexing="ij")
    u = np.cos(x) + np.cos(2 * y) + np.sin(z)
    op1 = SpatialOperator(g.axis, 0.0)
    expect = op1.apply(np.cos(g.axis.nodes))[:, None, None] + op1.apply(np.cos(2 * g.axis.nodes))[None, :, None]
    expect = expect + op1.apply(np.sin(g.axis.nodes))[None, None, :]
    assert np.allclose(op.apply(u), expect, atol=1e-10)


def test_rejects_large_c_and_3d_dirichlet_and_bad_shape():
    with pytest.raises(OperatorError):
        SpatialOperator(build_grid_1d(4), 1.5)
    assert SpatialOperator(build_grid_1d(4), 1.5, allow_unstable=True).c == 1.5
    with pytest.raises(UnsupportedFeatureError):
        SpatialOperator(build_grid_3d(4, 1.0, False), 0.0)
    with pytest.raises(DimensionError):
        SpatialOperator(build_grid_1d(4), 0.0).apply(np.ones(7))
