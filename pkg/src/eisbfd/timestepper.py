"""Explicit Runge-Kutta integration of ``v' = Q v + lift(t) + F(x, t)``.

The default method is Butcher's seven-stage sixth-order tableau; its order
conditions are checked against all rooted trees when the scheme is built.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

log = logging.getLogger(__name__)


class StabilityBoundError(ValueError):
    def __init__(self, dt, bound):
        super().__init__(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}; use dt <= {bound:.6g}")
        self.dt = dt
        self.suggested_dt = bound


class DivergenceError(RuntimeError):
    def __init__(self, step, t):
        super().__init__(f"non-finite solution detected at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


# {{{ order conditions


@lru_cache(maxsize=None)
def rooted_trees(order: int) -> tuple:
    """All rooted trees with ``order`` vertices, as sorted tuples of subtrees."""
    if order == 1:
        return ((),)
    out = set()

    def partitions(n, max_part):
        if n == 0:
            yield ()
            return
        for p in range(min(n, max_part), 0, -1):
            for rest in partitions(n - p, p):
                yield (p,) + rest

    def combos(sizes):
        if not sizes:
            yield ()
            return
        first, rest = sizes[0], sizes[1:]
        for t in rooted_trees(first):
            for tail in combos(rest):
                yield (t,) + tail

    for sizes in partitions(order - 1, order - 1):
        for children in combos(sizes):
            out.add(tuple(sorted(children)))
    return tuple(sorted(out))


def tree_order(t) -> int:
    return 1 + sum(tree_order(s) for s in t)


def tree_density(t) -> int:
    d = tree_order(t)
    for s in t:
        d *= tree_density(s)
    return d


def _stage_weights(t, A):
    w = np.ones(A.shape[0], dtype=object)
    for s in t:
        w = w * A.dot(_stage_weights(s, A))
    return w


def order_residuals(A, b, order: int) -> list[tuple]:
    """``(tree, b . Phi(tree) - 1/gamma(tree))`` for every tree up to ``order``."""
    out = []
    for p in range(1, order + 1):
        for t in rooted_trees(p):
            res = b.dot(_stage_weights(t, A)) - Fraction(1, tree_density(t))
            out.append((t, res))
    return out


# }}}


@dataclass(frozen=True)
class RKScheme:
    name: str
    a: np.ndarray
    b: np.ndarray
    c_nodes: np.ndarray
    order: int
    _exact: tuple = field(repr=False, default=())

    @property
    def stages(self) -> int:
        return len(self.b)

    @classmethod
    def from_fractions(cls, name, a, b, order):
        A = np.array([[Fraction(x) for x in row] for row in a], dtype=object)
        B = np.array([Fraction(x) for x in b], dtype=object)
        C = A.sum(axis=1)
        scheme = cls(name, A.astype(float), B.astype(float), C.astype(float), order, (A, B))
        scheme.check_order_conditions()
        return scheme

    def check_order_conditions(self, tol: float = 1e-12) -> None:
        A, B = self._exact if self._exact else (self.a, self.b)
        if abs(float(sum(B)) - 1) > tol:
            raise ValueError(f"{self.name}: weights do not sum to one")
        bad = [(t, r) for t, r in order_residuals(A, B, self.order) if abs(float(r)) > tol]
        if bad:
            raise ValueError(f"{self.name}: {len(bad)} order conditions fail, first {bad[0]}")

    def stability_function(self, z):
        """``R(z) = 1 + z b^T (I - zA)^{-1} 1`` evaluated by the stage recurrence."""
        z = np.asarray(z, dtype=complex)
        k = []
        for i in range(self.stages):
            y = 1 + z * sum(self.a[i, j] * k[j] for j in range(i)) if i else np.ones_like(z)
            k.append(y)
        return 1 + z * sum(self.b[i] * k[i] for i in range(self.stages))

    @property
    def real_stability_length(self) -> float:
        return _real_stability_length(self.name)


RK6 = RKScheme.from_fractions(
    "rk6-butcher",
    [
        [0, 0, 0, 0, 0, 0, 0],
        ["1/3", 0, 0, 0, 0, 0, 0],
        [0, "2/3", 0, 0, 0, 0, 0],
        ["1/12", "1/3", "-1/12", 0, 0, 0, 0],
        ["-1/16", "9/8", "-3/16", "-3/8", 0, 0, 0],
        [0, "9/8", "-3/8", "-3/4", "1/2", 0, 0],
        ["9/44", "-9/11", "63/44", "18/11", 0, "-16/11", 0],
    ],
    ["11/120", 0, "27/40", "27/40", "-4/15", "-4/15", "11/120"],
    6,
)

RK4 = RKScheme.from_fractions(
    "rk4",
    [[0, 0, 0, 0], ["1/2", 0, 0, 0], [0, "1/2", 0, 0], [0, 0, 1, 0]],
    ["1/6", "1/3", "1/3", "1/6"],
    4,
)

SCHEMES = {"rk6": RK6, "rk4": RK4}


@lru_cache(maxsize=None)
def _real_stability_length(name: str) -> float:
    """Largest X with ``|R(x)| <= 1`` on ``[-X, 0]``, by scan then bisection."""
    scheme = next(s for s in SCHEMES.values() if s.name == name)
    xs = -np.linspace(1e-6, 20, 20001)
    ok = np.abs(scheme.stability_function(xs)) <= 1 + 1e-13
    first_bad = int(np.argmin(ok)) if not ok.all() else len(xs) - 1
    lo, hi = -xs[first_bad - 1], -xs[first_bad]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(scheme.stability_function(-mid)) <= 1:
            lo = mid
        else:
            hi = mid
    return float(lo)


# safety factor on the periodic radius for Dirichlet grids past the dense
# eigensolve cap (measured ratio is 1 to rounding at N = 200 for c in [-1, 1])
DIRICHLET_MARGIN = 1.03
DENSE_EIG_MAX_NODES = 800


@lru_cache(maxsize=64)
def _radius_1d(n_cells: int, length: float, c: float, periodic: bool) -> float:
    from .grid import build_grid_1d
    from .operator import BoundaryData, SpatialOperator
    from .symbols import all_symbols

    if periodic:
        return float(np.max(np.abs(all_symbols(n_cells, c, length))))
    if 2 * n_cells > DENSE_EIG_MAX_NODES:
        return DIRICHLET_MARGIN * _radius_1d(n_cells, length, c, True)
    op = SpatialOperator(build_grid_1d(n_cells, length, False), c, BoundaryData.homogeneous(1), allow_unstable=True)
    return float(np.max(np.abs(np.linalg.eigvals(op.linear_matrix().toarray()))))


def spectral_radius_estimate(op) -> float:
    """Largest ``|lambda|`` of Q.

    Q is a Kronecker sum of identical 1D operators, so this is ``dim`` times
    the 1D radius: from the closed-form symbols when periodic, from a dense
    eigensolve when Dirichlet (periodic value times a measured margin on very
    large grids). The value ``32 (2 - c) / (3 h^2)`` at zero wavenumber is
    not always the extreme one.
    """
    g = op.grid
    return op.dim * _radius_1d(g.n_cells, float(g.length), float(op.c), bool(g.periodic))


def stable_dt(op, safety: float = 0.5, scheme: RKScheme = RK6) -> float:
    """Step size keeping ``dt * lambda`` inside the real stability interval."""
    if not 0 < safety <= 1:
        raise ValueError(f"safety must be in (0, 1], got {safety}")
    return safety * scheme.real_stability_length / spectral_radius_estimate(op)


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float
    steps: int

    @classmethod
    def covering(cls, t_final: float, dt_max: float) -> TimeGrid:
        """Uniform steps no longer than ``dt_max`` landing exactly on ``t_final``."""
        steps = max(1, int(np.ceil(t_final / dt_max - 1e-12)))
        return cls(t_final, t_final / steps, steps)


PROPAGATOR_MAX_NODES = 400


def step_matrices(Q, dt: float, scheme: RKScheme = RK6):
    """Dense one-step maps of the scheme applied to ``v' = Q v + s(t)``.

    Returns ``P`` and ``S`` with ``v_{n+1} = P v_n + S @ concat_k s(t_n + c_k dt)``
    where ``c_k`` runs over the distinct stage nodes. This is the same step
    as the stage recurrence, rearranged for small systems.
    """
    Q = np.asarray(Q.toarray() if hasattr(Q, "toarray") else Q, dtype=float)
    n = Q.shape[0]
    nodes, owner = np.unique(scheme.c_nodes, return_inverse=True)
    u = len(nodes)
    # coefficient blocks of every stage w.r.t. [v_n, s_0, ..., s_{u-1}]
    eye = np.eye(n)
    K = []
    for i in range(scheme.stages):
        Y = np.zeros((u + 1, n, n))
        Y[0] = eye
        for j in range(i):
            if scheme.a[i, j]:
                Y += (dt * scheme.a[i, j]) * K[j]
        Ki = Q @ Y
        Ki[1 + owner[i]] += eye
        K.append(Ki)
    W = np.zeros((u + 1, n, n))
    W[0] = eye
    for i in range(scheme.stages):
        if scheme.b[i]:
            W += (dt * scheme.b[i]) * K[i]
    return W[0], np.concatenate(list(W[1:]), axis=1), nodes


def integrate(
    op,
    f,
    forcing: Optional[Callable] = None,
    t_final: float = 1.0,
    dt: Optional[float] = None,
    scheme: RKScheme = RK6,
    t0: float = 0.0,
    allow_unstable_dt: bool = False,
    include_lift: bool = True,
    method: str = "auto",
    chunk_elems: int = 2_000_000,
) -> np.ndarray:
    """Advance ``v' = Q v + lift(t) + forcing(t)`` from ``t0`` to ``t_final``.

    ``forcing`` maps an array of times of shape ``(m,)`` to nodal values of
    shape ``(m, *grid.shape)``; sources for a block of steps are evaluated in
    one call, once per distinct stage time. ``dt`` is shrunk so the steps
    land on ``t_final``. ``method`` is ``"stages"`` (sparse stage
    recurrence), ``"propagator"`` (dense one-step matrices, small grids) or
    ``"auto"``.
    """
    v = np.array(f.values if hasattr(f, "values") else f, dtype=float)
    shape = op.grid.shape
    if v.shape != shape:
        raise ValueError(f"initial data shape {v.shape} does not match grid {shape}")
    span = t_final - t0
    if span < 0:
        raise ValueError("t_final must not precede t0")
    if span == 0:
        return v
    bound = stable_dt(op, 1.0, scheme)
    if dt is None:
        dt = stable_dt(op, 0.5, scheme)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > bound and not allow_unstable_dt:
        raise StabilityBoundError(dt, bound)
    tg = TimeGrid.covering(span, dt)
    dt = tg.dt

    n = v.size
    if method == "auto":
        method = "propagator" if n <= PROPAGATOR_MAX_NODES else "stages"
    if method not in ("stages", "propagator"):
        raise ValueError(f"unknown method {method!r}")
    lift = include_lift and not op.grid.periodic
    has_source = forcing is not None or lift
    nodes, owner = np.unique(scheme.c_nodes, return_inverse=True)
    u = len(nodes)

    def sources(first, m):
        times = (first + np.arange(m)[:, None] + nodes[None, :]) * dt
        times = t0 + times.reshape(-1)
        src = np.zeros((m * u, n))
        if lift:
            src += op.lift(times).reshape(m * u, n)
        if forcing is not None:
            src += np.asarray(forcing(times), dtype=float).reshape(m * u, n)
        return src.reshape(m, u, n)

    x = v.reshape(-1)
    Q = op.linear_matrix()
    per_chunk = max(1, chunk_elems // (u * n)) if has_source else 1000
    if method == "propagator":
        P, S, _ = step_matrices(Q, dt, scheme)
    dt_a, dt_b = dt * scheme.a, dt * scheme.b
    s = scheme.stages
    k = np.empty((s, n))
    step = 0
    # overflow is reported as DivergenceError below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        while step < tg.steps:
            m = min(per_chunk, tg.steps - step)
            src = sources(step, m) if has_source else None
            if method == "propagator":
                g = src.reshape(m, u * n) @ S.T if has_source else None
                for i in range(m):
                    x = P @ x
                    if g is not None:
                        x += g[i]
            else:
                for i in range(m):
                    for st in range(s):
                        y = x + dt_a[st, :st] @ k[:st] if st else x
                        k[st] = Q @ y
                        if has_source:
                            k[st] += src[i, owner[st]]
                    x = x + dt_b @ k
            step += m
            if not np.all(np.isfinite(x)):
                raise DivergenceError(step, t0 + step * dt)
    return x.reshape(shape)


def integrate_scalar(rhs: Callable, y0: float, t_final: float, dt: float, scheme: RKScheme = RK6, t0=0.0):
    """Fixed-step integration of a scalar (or small vector) ODE ``y' = rhs(t, y)``."""
    grid_t = TimeGrid.covering(t_final - t0, dt)
    h = grid_t.dt
    y = np.asarray(y0, dtype=float)
    t = t0
    for _ in range(grid_t.steps):
        k = []
        for st in range(scheme.stages):
            yi = y + h * sum(scheme.a[st, j] * k[j] for j in range(st)) if st else y
            k.append(np.asarray(rhs(t + scheme.c_nodes[st] * h, yi)))
        y = y + h * sum(scheme.b[st] * k[st] for st in range(scheme.stages))
        t += h
    return y
