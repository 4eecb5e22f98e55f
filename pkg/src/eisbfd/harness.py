"""Manufactured-solution cases, error norms and convergence studies."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from .filters import FilterSpec, apply_filter
from .grid import build_grid
from .operator import BoundaryData, FaceTraces, Field, SpatialOperator
from .timestepper import DivergenceError, integrate, stable_dt

log = logging.getLogger(__name__)

C_OPTIMAL = -4 / 13
CSV_COLUMNS = ["case", "N", "h", "c", "filter", "err_l2", "err_linf", "slope_pairwise", "slope_fit"]

_X, _Y, _T = sp.symbols("x y t", real=True)
_SPACE = (_X, _Y)


class HarnessError(RuntimeError):
    pass


def _vectorize(expr, args):
    fn = sp.lambdify(args, expr, modules="numpy")

    def call(*vals):
        out = np.asarray(fn(*vals))
        # keeps extended precision when the inputs carry it
        return np.broadcast_to(out, np.broadcast(*vals).shape).astype(np.result_type(out, float))

    return call


@dataclass(frozen=True)
class TestCase:
    """A manufactured problem ``u_t = lap u + F`` with closed-form data."""

    __test__ = False  # not a pytest class

    name: str
    dim: int
    periodic: bool
    expr: sp.Expr
    length: float = 1.0
    c: float = 0.0
    resolutions: tuple = (24, 36, 48)
    t_final: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        # accept expressions built from any symbols named x, y, t
        expr = sp.sympify(self.expr)
        allowed = {v.name: v for v in (*_SPACE[: self.dim], _T)}
        extra = sorted(v.name for v in expr.free_symbols if v.name not in allowed)
        if extra:
            raise HarnessError(f"{self.name}: unexpected symbols {extra} in u (use {', '.join(allowed)})")
        expr = expr.xreplace({v: allowed[v.name] for v in expr.free_symbols})
        object.__setattr__(self, "expr", expr)

    @property
    def space(self):
        return _SPACE[: self.dim]

    @property
    def forcing_expr(self) -> sp.Expr:
        # left unsimplified: simplification can introduce float constants such as sqrt(2)
        lap = sum(sp.diff(self.expr, v, 2) for v in self.space)
        return sp.diff(self.expr, _T) - lap

    def _fn(self, key, expr):
        if key not in self._cache:
            self._cache[key] = _vectorize(expr, (*self.space, _T))
        return self._cache[key]

    def exact(self, *coords_t):
        return self._fn("u", self.expr)(*coords_t)

    def forcing(self, *coords_t):
        return self._fn("F", self.forcing_expr)(*coords_t)

    def exact_t(self, *coords_t):
        return self._fn("u_t", sp.diff(self.expr, _T))(*coords_t)

    def laplacian(self, *coords_t):
        return self._fn("lap", sum(sp.diff(self.expr, v, 2) for v in self.space))(*coords_t)

    def with_c(self, c: float) -> TestCase:
        return replace(self, c=float(c))

    def with_resolutions(self, resolutions) -> TestCase:
        return replace(self, resolutions=tuple(int(n) for n in resolutions))

    def forcing_residual(self, samples: int = 100, seed: int = 0) -> float:
        """Max of ``|u_t - lap u - F|`` at random points, using finite-free symbolic derivatives."""
        rng = np.random.default_rng(seed)
        pts = [rng.uniform(0, self.length, samples) for _ in range(self.dim)]
        t = rng.uniform(0, self.t_final, samples)
        lap = sum(sp.diff(self.expr, v, 2) for v in self.space)
        lhs = _vectorize(sp.diff(self.expr, _T) - lap, (*self.space, _T))(*pts, t)
        return float(np.max(np.abs(lhs - self.forcing(*pts, t))))

    def boundary_data(self) -> Optional[BoundaryData]:
        if self.periodic:
            return None
        if "bd" in self._cache:
            return self._cache["bd"]
        u, F = self.expr, self.forcing_expr
        faces = {}
        for axis, normal in enumerate(self.space):
            tangent = [v for v in self.space if v is not normal]
            for side, pos in ((0, 0), (1, self.length)):
                sub = {normal: pos}
                args = (*tangent, _T)
                mk = lambda e: _vectorize(e.subs(sub), args)  # noqa: E731
                traces = dict(
                    g=mk(u),
                    g_t=mk(sp.diff(u, _T)),
                    g_tt=mk(sp.diff(u, _T, 2)),
                    f=mk(F),
                    f_t=mk(sp.diff(F, _T)),
                    f_nn=mk(sp.diff(F, normal, 2)),
                )
                if tangent:
                    s = tangent[0]
                    traces.update(
                        g_ss=mk(sp.diff(u, s, 2)),
                        g_tss=mk(sp.diff(u, _T, s, s)),
                        g_ssss=mk(sp.diff(u, s, 4)),
                        f_ss=mk(sp.diff(F, s, 2)),
                    )
                faces[(axis, side)] = FaceTraces(**traces)
        bd = BoundaryData(faces)
        self._cache["bd"] = bd
        return bd

    def grid(self, n: int):
        return build_grid(self.dim, n, self.length, self.periodic)

    def operator(self, n: int) -> SpatialOperator:
        return SpatialOperator(self.grid(n), self.c, self.boundary_data())

    def has_forcing(self) -> bool:
        return self.forcing_expr != 0


def builtin_cases() -> dict:
    x, y, t = _X, _Y, _T
    cases = [
        TestCase("dirichlet1d", 1, False, sp.exp(sp.cos(x - t)), 1.0, 0.0, (24, 36, 48, 60, 72), 1.0),
        TestCase(
            "periodic2d", 2, True, sp.exp(sp.cos(2 * sp.pi * (x + y - t))), 1.0, C_OPTIMAL, (50, 60, 70, 80), 1.0
        ),
        TestCase(
            "dirichlet2d", 2, False, sp.exp(sp.cos(x + y - t)), 1.0, C_OPTIMAL, (24, 36, 48, 60, 72, 96), 1.0
        ),
    ]
    for k in (1, 2, 3):
        cases.append(
            TestCase(
                f"mode1d_k{k}",
                1,
                True,
                sp.exp(-(k**2) * t) * sp.cos(k * x),
                float(2 * np.pi),
                C_OPTIMAL,
                (16, 24, 32, 48),
                1.0,
            )
        )
    return {c.name: c for c in cases}


def reduced_ladder(case: TestCase) -> TestCase:
    """CI-sized resolutions for the 2D cases."""
    ladders = {"periodic2d": (20, 28, 40), "dirichlet2d": (24, 36, 48)}
    return case.with_resolutions(ladders.get(case.name, case.resolutions))


def case_from_file(path) -> TestCase:
    """Read a ``key = value`` case file; ``u`` is a sympy expression in x, y, t."""
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            key, _, val = line.partition("=")
            cfg[key.strip()] = val.strip()
    try:
        expr = sp.sympify(cfg["u"], locals={"x": _X, "y": _Y, "t": _T})
        dim = int(cfg.get("dim", 1))
    except (KeyError, sp.SympifyError) as exc:
        raise HarnessError(f"bad case file {path}: {exc}") from exc
    periodic = cfg.get("boundary", "dirichlet").lower() == "periodic"
    res = tuple(int(v) for v in cfg.get("resolutions", "24,36,48").split(","))
    return TestCase(
        cfg.get("name", Path(path).stem),
        dim,
        periodic,
        expr,
        float(sp.sympify(cfg.get("length", "1"))),
        float(cfg.get("c", 0.0)),
        res,
        float(cfg.get("t_final", 1.0)),
    )


# {{{ single runs


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    linf: float


def error_norms(err: np.ndarray, h: float) -> ErrorNorms:
    """Max norm and the cell-scaled 2-norm ``|E|_2 * sqrt(h/2)^d``."""
    e = np.asarray(err).reshape(-1)
    scale = np.sqrt(h / 2) ** np.asarray(err).ndim
    return ErrorNorms(float(np.sqrt(np.dot(e, e)) * scale), float(np.max(np.abs(e))))


def _mesh(grid, dtype=float):
    pts = grid.mesh() if grid.dim > 1 else (grid.nodes,)
    return tuple(np.asarray(p, dtype=dtype) for p in pts)


def _forcing_callable(case: TestCase, grid) -> Optional[Callable]:
    if not case.has_forcing():
        return None
    mesh = _mesh(grid)

    def forcing(ts):
        ts = np.asarray(ts, dtype=float).reshape((-1,) + (1,) * case.dim)
        return case.forcing(*(m[None] for m in mesh), ts)

    return forcing


class ResidualSource:
    """Residual ``r = Q u_I + lift + F - u_t = Q u_I + lift - lap u`` of the sampled exact solution.

    ``r`` is the source of the error equation ``w' = Q w + r`` for
    ``w = v - u_I``. It is evaluated in extended precision at Chebyshev
    points of time panels and interpolated to the requested times. The
    interpolant's error is far below double rounding of ``r`` itself.
    """

    def __init__(self, case: TestCase, op: SpatialOperator, t_final: float, panel: float = 0.05, order: int = 12):
        self.case, self.op = case, op
        self.n_panels = max(1, int(np.ceil(t_final / panel - 1e-12)))
        self.width = t_final / self.n_panels
        k = np.arange(order)
        self.nodes = np.cos((2 * k + 1) * np.pi / (2 * order))[::-1]
        self.weights = ((-1.0) ** k * np.sin((2 * k + 1) * np.pi / (2 * order)))[::-1]
        self.mesh = _mesh(op.grid, np.longdouble)
        self._panels: dict = {}

    def exact_residual(self, ts) -> np.ndarray:
        """Direct extended-precision evaluation at the times ``ts``."""
        t = np.asarray(ts, dtype=np.longdouble).reshape(-1)
        tt = t.reshape((-1,) + (1,) * self.case.dim)
        pts = tuple(m[None] for m in self.mesh)
        u = self.case.exact(*pts, tt)
        return self.op.apply(u, t) - self.case.laplacian(*pts, tt)

    def _panel(self, p):
        if p not in self._panels:
            t = self.width * (p + 0.5 * (1 + self.nodes.astype(np.longdouble)))
            self._panels[p] = self.exact_residual(t).astype(float).reshape(len(self.nodes), -1)
        return self._panels[p]

    def _lagrange(self, tau):
        diff = tau[:, None] - self.nodes[None, :]
        exact = diff == 0
        diff[exact] = 1.0
        L = self.weights / diff
        L /= L.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        L[hit] = exact[hit]
        return L

    def __call__(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).reshape(-1)
        idx = np.clip((ts / self.width).astype(int), 0, self.n_panels - 1)
        out = np.empty((ts.size, self.op.grid.n_nodes))
        for p in np.unique(idx):
            sel = idx == p
            tau = 2 * (ts[sel] - p * self.width) / self.width - 1
            out[sel] = self._lagrange(tau) @ self._panel(int(p))
        return out.reshape((ts.size,) + self.op.grid.shape)


@dataclass
class RunResult:
    case: str
    n: int
    h: float
    c: float
    dt: float
    filter: str
    field: Field
    norms: ErrorNorms
    raw_norms: ErrorNorms
    error: np.ndarray = field(repr=False, default=None)  # exact minus computed, unfiltered
    exact_final: np.ndarray = field(repr=False, default=None)


def filtered_error(result: RunResult, spec: Optional[FilterSpec]) -> np.ndarray:
    """``u_I - filter(v)``, split as ``(u_I - filter(u_I)) + filter(u_I - v)`` to avoid cancellation."""
    if spec is None:
        return result.error
    grid = result.field.grid
    uT = result.exact_final
    own = uT - apply_filter(Field(uT, grid, result.field.time), spec).values
    return np.asarray(own, dtype=float) + apply_filter(Field(result.error, grid), spec).values


def run_case(
    case: TestCase,
    resolution: int,
    filter: Optional[FilterSpec] = None,
    dt: Optional[float] = None,
    safety: float = 0.5,
    allow_unstable_dt: bool = False,
    form: str = "error",
) -> RunResult:
    """Integrate ``case`` at ``N = resolution`` and measure the final-time error.

    ``form="error"`` integrates ``w = v - u_I`` driven by the extended
    precision residual (see :class:`ResidualSource`), so the error is not
    swamped by double rounding of O(1) values; ``form="direct"`` integrates
    ``v`` with the lift and forcing in double precision. Both advance the
    same discrete system with the same tableau.
    """
    op = case.operator(resolution)
    grid = op.grid
    if dt is None:
        dt = stable_dt(op, safety)
    ld_mesh = _mesh(grid, np.longdouble)
    uT = case.exact(*ld_mesh, np.longdouble(case.t_final))
    try:
        if form == "error":
            src = ResidualSource(case, op, case.t_final)
            w = integrate(
                op, np.zeros(grid.shape), src, case.t_final, dt,
                allow_unstable_dt=allow_unstable_dt, include_lift=False,
            )  # fmt: skip
            err = -w
            v = np.asarray(uT, dtype=float) + w
        elif form == "direct":
            mesh = _mesh(grid)
            v = integrate(
                op, case.exact(*mesh, 0.0), _forcing_callable(case, grid), case.t_final, dt,
                allow_unstable_dt=allow_unstable_dt,
            )  # fmt: skip
            err = np.asarray(uT - v, dtype=float)
        else:
            raise ValueError(f"unknown form {form!r}")
    except DivergenceError as exc:
        raise HarnessError(f"{case.name}: divergence at N={resolution}, dt={dt:.4g}: {exc}") from exc
    result = RunResult(
        case.name, resolution, grid.h, case.c, dt, "none",
        Field(v, grid, case.t_final), error_norms(err, grid.h), error_norms(err, grid.h), err, uT,
    )  # fmt: skip
    if filter is not None:
        result.filter = filter.label
        result.norms = error_norms(filtered_error(result, filter), grid.h)
        result.field = apply_filter(result.field, filter)
    return result


# }}}


# {{{ studies


def fit_slope(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    lh, le = np.log(np.asarray(h, float)), np.log(np.asarray(err, float))
    return float(np.polyfit(lh, le, 1)[0])


def pairwise_slopes(h, err) -> list:
    h, err = np.asarray(h, float), np.asarray(err, float)
    return [float("nan")] + list(np.log(err[1:] / err[:-1]) / np.log(h[1:] / h[:-1]))


@dataclass
class ConvergenceReport:
    case: str
    c: float
    filter: str
    n: list
    h: list
    err_l2: list
    err_linf: list
    dt: float
    slope_pairwise: list = field(default_factory=list)
    slope_fit: float = float("nan")
    dt_check: Optional[float] = None  # relative change of the finest error under dt/2

    def __post_init__(self):
        if not self.slope_pairwise:
            self.slope_pairwise = pairwise_slopes(self.h, self.err_l2)
            self.slope_fit = fit_slope(self.h[-3:], self.err_l2[-3:])

    @property
    def slope_fit_linf(self) -> float:
        return fit_slope(self.h[-3:], self.err_linf[-3:])

    def rows(self) -> list:
        return [
            [self.case, n, *(repr(float(v)) for v in (h, self.c)), self.filter, *(repr(float(v)) for v in (e2, ei, sp_, self.slope_fit))]
            for n, h, e2, ei, sp_ in zip(self.n, self.h, self.err_l2, self.err_linf, self.slope_pairwise)
        ]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", "filter", "N", "log10_h", "log10_err_l2", "log10_err_linf"])
        for n, h, e2, ei in zip(self.n, self.h, self.err_l2, self.err_linf):
            w.writerow([self.case, self.filter, n, *(repr(float(np.log10(v))) for v in (h, e2, ei))])
        return buf.getvalue()

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{self.case}_c{self.c:+.6f}_{self.filter}"
        p1, p2 = out / f"{stem}.csv", out / f"{stem}_plot.csv"
        p1.write_text(self.to_csv())
        p2.write_text(self.plot_csv())
        return p1, p2


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("EISBFD_THREADS", "1")))
    except ValueError:
        return 1


def study_dt(case: TestCase, safety: float = 0.5) -> float:
    return min(stable_dt(case.operator(n), safety) for n in case.resolutions)


def convergence_study(
    case: TestCase,
    filter=None,
    dt: Optional[float] = None,
    safety: float = 0.5,
    verify_dt: bool = False,
    dt_tol: float = 0.01,
    form: str = "error",
) -> ConvergenceReport | list:
    """Run every resolution once and report slopes for each requested filter.

    ``filter`` may be a single FilterSpec (or None) or a list of them; with a
    list, one report per entry is returned from the same set of runs. With
    ``verify_dt`` the finest grid is rerun at ``dt/2`` and ``dt`` is halved
    until the finest error changes by less than ``dt_tol``.
    """
    if len(case.resolutions) < 3:
        raise HarnessError("a convergence study needs at least 3 resolutions")
    specs = filter if isinstance(filter, (list, tuple)) else [filter]
    if dt is None:
        dt = study_dt(case, safety)
    check = None
    if verify_dt:
        finest = case.resolutions[-1]
        for _ in range(6):
            a = run_case(case, finest, None, dt, form=form).raw_norms.l2
            b = run_case(case, finest, None, dt / 2, form=form).raw_norms.l2
            check = abs(a - b) / b
            if check < dt_tol:
                break
            dt /= 2
        else:
            raise HarnessError(f"{case.name}: time error still dominant at dt={dt:.3g}")

    def one(n):
        base = run_case(case, n, None, dt, form=form)
        outs = [error_norms(filtered_error(base, spec), base.h) for spec in specs]
        log.info("%s N=%d done", case.name, n)
        return base.h, outs

    with ThreadPoolExecutor(worker_count()) as pool:
        results = list(pool.map(one, case.resolutions))
    reports = []
    for i, spec in enumerate(specs):
        reports.append(
            ConvergenceReport(
                case.name,
                case.c,
                spec.label if spec else "none",
                list(case.resolutions),
                [r[0] for r in results],
                [r[1][i].l2 for r in results],
                [r[1][i].linf for r in results],
                dt,
                dt_check=check,
            )
        )
    return reports if isinstance(filter, (list, tuple)) else reports[0]


def reports_csv(reports: Sequence[ConvergenceReport]) -> str:
    return "".join(r.to_csv(header=(i == 0)) for i, r in enumerate(reports))


# }}}
