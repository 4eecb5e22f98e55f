"""The block finite difference Laplacian.

Every node row uses the five-point fourth-order stencil plus ``c`` times a
six-point fifth difference whose orientation alternates with the node's
position inside its cell. Dirichlet axes are closed with two ghost nodes per
side, extrapolated from the boundary value and the PDE-derived traces
``u_nn`` and ``u_nnnn``. Multi-dimensional operators sweep the 1D stencil
along every grid line of every axis.

Under Dirichlet data the operator is affine: ``apply(u, t) = Q u + lift(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .grid import BlockGrid, BlockGrid1D

DENSE_ROW_CAP = 10_000

# Offsets -3..3 relative to the output node.
_MAIN = np.array([0.0, -1.0, 16.0, -30.0, 16.0, -1.0, 0.0])
_FIFTH_LEFT = np.array([0.0, 1.0, -5.0, 10.0, -10.0, 5.0, -1.0])
_FIFTH_RIGHT = np.array([-1.0, 5.0, -10.0, 10.0, -5.0, 1.0, 0.0])


class OperatorError(ValueError):
    pass


class DimensionError(OperatorError):
    pass


class ConfigurationError(OperatorError):
    pass


class UnsupportedFeatureError(OperatorError):
    pass


class SizeError(OperatorError):
    pass


def stencil_weights(c: float) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled row weights (offsets -3..3) for the left and right node of a cell."""
    return _MAIN + c * _FIFTH_LEFT, _MAIN + c * _FIFTH_RIGHT


# {{{ boundary data


@dataclass(frozen=True)
class FaceTraces:
    """Dirichlet data on one face, plus the traces needed to extrapolate ghosts.

    In 1D every callable takes ``t``; in 2D they take ``(s, t)`` with ``s`` the
    tangential coordinate. ``f_nn`` is the second normal derivative of the
    forcing, ``f_ss``/``g_ss``/``g_tss``/``g_ssss`` are tangential derivatives
    (2D only, omitted means zero). All callables must broadcast over numpy
    arrays.
    """

    g: Callable
    g_t: Callable
    g_tt: Callable
    f: Optional[Callable] = None
    f_t: Optional[Callable] = None
    f_nn: Optional[Callable] = None
    g_ss: Optional[Callable] = None
    g_tss: Optional[Callable] = None
    g_ssss: Optional[Callable] = None
    f_ss: Optional[Callable] = None

    def normal_derivatives(self, *args):
        """Return ``(u, u_nn, u_nnnn)`` on the face from the PDE ``u_t = lap u + F``."""

        def ev(fn):
            if fn is None:
                return 0.0
            return fn(*args)

        g = ev(self.g)
        u_nn = ev(self.g_t) - ev(self.g_ss) - ev(self.f)
        u_nnnn = (
            ev(self.g_tt)
            - 2 * ev(self.g_tss)
            - ev(self.f_t)
            + ev(self.g_ssss)
            + ev(self.f_ss)
            - ev(self.f_nn)
        )
        return g, u_nn, u_nnnn


def forward_time_derivatives(g: Callable, delta: float = 1e-3) -> tuple[Callable, Callable]:
    """Fourth-order one-sided (forward) differences in ``t`` for ``g_t`` and ``g_tt``.

    ``g`` is called as ``g(*args, t)`` with time last.
    """
    d1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    d2 = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0

    def g_t(*args):
        *rest, t = args
        return sum(w * g(*rest, t + k * delta) for k, w in enumerate(d1)) / delta

    def g_tt(*args):
        *rest, t = args
        return sum(w * g(*rest, t + k * delta) for k, w in enumerate(d2)) / delta**2

    return g_t, g_tt


@dataclass(frozen=True)
class BoundaryData:
    """Face traces keyed by ``(axis, side)`` with side 0 at the origin and 1 at ``L``."""

    faces: dict

    def face(self, axis: int, side: int) -> FaceTraces:
        try:
            return self.faces[(axis, side)]
        except KeyError:
            raise ConfigurationError(f"no boundary data for axis {axis} side {side}") from None

    @classmethod
    def homogeneous(cls, dim: int) -> BoundaryData:
        zero = (lambda t: 0.0 * t) if dim == 1 else (lambda s, t: 0.0 * (s + t))
        tr = FaceTraces(zero, zero, zero)
        return cls({(a, s): tr for a in range(dim) for s in (0, 1)})


# }}}


@dataclass(frozen=True)
class Field:
    """Nodal values on a grid at a given time."""

    values: np.ndarray
    grid: BlockGrid
    time: float = 0.0

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape:
            raise DimensionError(
                f"field shape {np.shape(self.values)} does not match grid shape {self.grid.shape}"
            )


@dataclass(frozen=True)
class SpatialOperator:
    grid: BlockGrid
    c: float = 0.0
    boundary: Optional[BoundaryData] = None
    allow_unstable: bool = False
    _matrix: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.allow_unstable and abs(self.c) > 1:
            raise OperatorError(f"|c| must be <= 1 for a stable scheme, got c={self.c}")
        if self.grid.dim == 3 and not self.grid.periodic:
            raise UnsupportedFeatureError("3D Dirichlet closures are not supported")

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def boundary_mode(self) -> str:
        return "periodic" if self.grid.periodic else "dirichlet"

    @property
    def scale(self) -> float:
        """The common factor 1/(12 (h/2)^2)."""
        return 1.0 / (3.0 * self.grid.h**2)

    # {{{ matrix-free application

    def _check_shape(self, u):
        d = self.dim
        if u.ndim < d or u.shape[u.ndim - d :] != self.grid.shape:
            raise DimensionError(f"array of shape {u.shape} does not end in grid shape {self.grid.shape}")

    def _sweep(self, ext: np.ndarray, n: int) -> np.ndarray:
        """Apply the stencil along the last axis of an array padded by 3 on each side.

        The integer main and fifth-difference weights are applied separately
        and combined with ``c`` afterwards, so every row annihilates
        constants exactly in any floating point precision.
        """
        m = n // 2
        lo = ext[..., 0::2]
        hi = ext[..., 1::2]

        def corr(weights, parity):
            # output 2i+parity reads ext[2i + parity + k], k = 0..6
            acc = np.zeros(ext.shape[:-1] + (m,), dtype=ext.dtype)
            for k, w in enumerate(weights):
                if w:
                    j = parity + k
                    src = lo if j % 2 == 0 else hi
                    acc += w * src[..., j // 2 : j // 2 + m]
            return acc

        dtype = ext.dtype.type
        c = dtype(self.c)
        scale = dtype(1) / (dtype(3) * dtype(self.grid.h) ** 2)
        out = np.empty(ext.shape[:-1] + (n,), dtype=ext.dtype)
        out[..., 0::2] = (corr(_MAIN, 0) + c * corr(_FIFTH_LEFT, 0)) * scale
        out[..., 1::2] = (corr(_MAIN, 1) + c * corr(_FIFTH_RIGHT, 1)) * scale
        return out

    def _ghost_data(self, axis: int, t, batch_shape, homogeneous: bool):
        """Data parts of the ghost values (nearest, farther) on both sides of ``axis``."""
        h = self.grid.h
        if homogeneous:
            return None
        if self.boundary is None:
            raise ConfigurationError("Dirichlet operator requires BoundaryData")
        t = np.asarray(t)
        if t.dtype.kind != "f":
            t = t.astype(float)
        if self.dim == 1:
            args = (t,)
        else:
            s = self.grid.axis.nodes
            args = (s, t[..., None])
        out = []
        for side in (0, 1):
            g, a, b = self.boundary.face(axis, side).normal_derivatives(*args)
            near = 2 * g + a * (h / 4) ** 2 + b * (h / 4) ** 4 / 12
            far = 2 * g + a * (3 * h / 4) ** 2 + b * (3 * h / 4) ** 4 / 12
            tgt = batch_shape + ((self.grid.shape[0],) if self.dim > 1 else ())
            out.append((np.broadcast_to(near, tgt), np.broadcast_to(far, tgt)))
        return out

    def _apply_axis(self, u, axis_pos, data):
        """Second difference along axis ``axis_pos`` (counted from the end of u)."""
        v = np.moveaxis(u, axis_pos, -1)
        n = v.shape[-1]
        if self.grid.periodic:
            ext = np.concatenate([v[..., -3:], v, v[..., :3]], axis=-1)
        else:
            zero = np.zeros(v.shape[:-1] + (1,), dtype=v.dtype)
            near_l = -v[..., 0:1]
            far_l = -v[..., 1:2]
            near_r = -v[..., n - 1 : n]
            far_r = -v[..., n - 2 : n - 1]
            if data is not None:
                (dnl, dfl), (dnr, dfr) = data
                near_l = near_l + dnl[..., None]
                far_l = far_l + dfl[..., None]
                near_r = near_r + dnr[..., None]
                far_r = far_r + dfr[..., None]
            ext = np.concatenate([zero, far_l, near_l, v, near_r, far_r, zero], axis=-1)
        return np.moveaxis(self._sweep(ext, n), -1, axis_pos)

    def _apply(self, u, t, homogeneous):
        u = np.asarray(u)
        self._check_shape(u)
        d = self.dim
        batch_shape = u.shape[: u.ndim - d]
        if not self.grid.periodic and not homogeneous:
            t_arr = np.asarray(t, dtype=float)
            if t_arr.shape not in ((), batch_shape):
                raise DimensionError(f"time shape {t_arr.shape} does not match batch shape {batch_shape}")
        out = None
        for k in range(d):
            data = None
            if not self.grid.periodic:
                data = self._ghost_data(k, t, batch_shape, homogeneous)
            term = self._apply_axis(u, u.ndim - d + k, data)
            out = term if out is None else out + term
        return out

    def apply(self, u, t=0.0) -> np.ndarray:
        """``Q u + lift(t)`` for ``u`` of shape ``(*batch, *grid.shape)``.

        ``t`` is a scalar or has shape ``batch``; it is ignored when periodic.
        """
        return self._apply(u, t, homogeneous=False)

    def apply_linear(self, u) -> np.ndarray:
        """``Q u`` without the boundary lift."""
        return self._apply(u, 0.0, homogeneous=True)

    def lift(self, t) -> np.ndarray:
        """Inhomogeneous part ``apply(0, t)``, vectorized over an array of times."""
        t = np.asarray(t)
        if t.dtype.kind != "f":
            t = t.astype(float)
        shape = t.shape + self.grid.shape
        out = np.zeros(shape, dtype=t.dtype)
        if self.grid.periodic:
            return out
        A, _, C = _boundary_coupling(self.c, self.grid.h)
        d = self.dim
        for k in range(d):
            (nl, fl), (nr, fr) = self._ghost_data(k, t, t.shape, homogeneous=False)
            v = np.moveaxis(out, t.ndim + k, -1)
            # left ghosts enter rows 0, 1 through A; right ghosts rows n-2, n-1 through C
            v[..., 0] += A[0, 0] * fl + A[0, 1] * nl
            v[..., 1] += A[1, 0] * fl + A[1, 1] * nl
            v[..., -2] += C[0, 0] * nr + C[0, 1] * fr
            v[..., -1] += C[1, 0] * nr + C[1, 1] * fr
        return out

    # }}}

    # {{{ assembled forms

    def matrix_1d(self) -> sp.csr_matrix:
        """Sparse 1D linear part, built as stencil times extension matrix."""
        key = "1d"
        if key not in self._matrix:
            ax = self.grid.axes[0]
            self._matrix[key] = _assemble_1d(ax, self.c)
        return self._matrix[key]

    def linear_matrix(self) -> sp.csr_matrix:
        """Sparse ``Q`` on the flattened (C-order) field."""
        key = "nd"
        if key not in self._matrix:
            q1 = self.matrix_1d()
            n = q1.shape[0]
            eye = sp.identity(n, format="csr")
            total = None
            for k in range(self.dim):
                factors = [eye] * self.dim
                factors[k] = q1
                term = factors[0]
                for f in factors[1:]:
                    term = sp.kron(term, f, format="csr")
                total = term if total is None else total + term
            self._matrix[key] = total.tocsr()
        return self._matrix[key]

    # }}}


def _boundary_coupling(c: float, h: float):
    from .dg_equiv import bfd_blocks_interior

    blocks = bfd_blocks_interior(c, h)
    return blocks.A, blocks.B, blocks.C


def _assemble_1d(grid: BlockGrid1D, c: float) -> sp.csr_matrix:
    n = grid.n_nodes
    wl, wr = stencil_weights(c)
    rows, cols, vals = [], [], []
    for i in range(n):
        w = wl if i % 2 == 0 else wr
        for k in range(7):
            if w[k]:
                rows.append(i)
                cols.append(i + k)
                vals.append(w[k])
    stencil = sp.csr_matrix((vals, (rows, cols)), shape=(n, n + 6))
    er, ec, ev = list(range(3, n + 3)), list(range(n)), [1.0] * n
    if grid.periodic:
        for p, src in zip([0, 1, 2, n + 3, n + 4, n + 5], [n - 3, n - 2, n - 1, 0, 1, 2]):
            er.append(p)
            ec.append(src)
            ev.append(1.0)
    else:
        for p, src in zip([1, 2, n + 3, n + 4], [1, 0, n - 1, n - 2]):
            er.append(p)
            ec.append(src)
            ev.append(-1.0)
    ext = sp.csr_matrix((ev, (er, ec)), shape=(n + 6, n))
    return (stencil @ ext).tocsr() / (3.0 * grid.h**2)


def assemble_dense(op: SpatialOperator, t: float = 0.0, cap: int = DENSE_ROW_CAP):
    """Dense ``(Q, b)`` with ``apply(u, t) = Q u + b``, probed through the matrix-free path."""
    n = op.grid.n_nodes
    if n > cap:
        raise SizeError(f"{n} rows exceed the dense assembly cap of {cap}")
    shape = op.grid.shape
    Q = np.empty((n, n))
    chunk = max(1, min(n, 2_000_000 // n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        probes = np.zeros((stop - start, n))
        probes[np.arange(stop - start), np.arange(start, stop)] = 1.0
        Q[:, start:stop] = op.apply_linear(probes.reshape((stop - start,) + shape)).reshape(stop - start, n).T
    if op.grid.periodic:
        b = np.zeros(n)
    else:
        b = op.apply(np.zeros(shape), t).reshape(n)
    return Q, b


# {{{ field-level entry points


def _check_field(op, u, dim, periodic=None):
    if op.dim != dim:
        raise DimensionError(f"operator is {op.dim}D, expected {dim}D")
    if periodic is not None and op.grid.periodic != periodic:
        raise ConfigurationError(f"expected a {'periodic' if periodic else 'Dirichlet'} grid")
    values = u.values if isinstance(u, Field) else np.asarray(u)
    if values.shape != op.grid.shape:
        raise DimensionError(f"field shape {values.shape} does not match grid {op.grid.shape}")
    return values


def apply_periodic_1d(op: SpatialOperator, u) -> Field:
    values = _check_field(op, u, 1, periodic=True)
    return Field(op.apply(values), op.grid, getattr(u, "time", 0.0))


def apply_dirichlet_1d(op: SpatialOperator, u, t: float) -> Field:
    values = _check_field(op, u, 1, periodic=False)
    if op.boundary is None:
        raise ConfigurationError("Dirichlet operator requires BoundaryData")
    return Field(op.apply(values, t), op.grid, t)


def apply_2d(op: SpatialOperator, u, t: float = 0.0) -> Field:
    values = _check_field(op, u, 2)
    return Field(op.apply(values, t), op.grid, t)


def apply_3d_periodic(op: SpatialOperator, u) -> Field:
    values = _check_field(op, u, 3)
    if not op.grid.periodic:
        raise UnsupportedFeatureError("3D Dirichlet closures are not supported")
    return Field(op.apply(values), op.grid, getattr(u, "time", 0.0))


# }}}
