"""Post-processing filters applied once at the final time.

``spectral`` truncates the high half of the 2N-point spectrum of periodic
data. The two interpolation filters and Savitzky-Golay are windowed
least-squares polynomial fits for non-periodic data. Multi-dimensional data
is filtered line by line along every axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .operator import Field, UnsupportedFeatureError

KINDS = ("spectral", "interp1", "interp2", "savitzky_golay")
_ALIASES = {"sg": "savitzky_golay", "savgol": "savitzky_golay"}
BLOCK = 12


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    degree: int = 6
    m: int = 5
    hf_terms: int = 2  # alternating nuisance terms of the interpolation filters

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; choose from {', '.join(KINDS)}")
        object.__setattr__(self, "kind", kind)
        if self.degree < 0 or self.m < 1 or self.hf_terms < 0:
            raise ValueError("degree and hf_terms must be >= 0 and m >= 1")
        if kind == "savitzky_golay" and self.degree > 2 * self.m:
            raise ValueError(f"degree {self.degree} exceeds the window size {2 * self.m + 1} - 1")

    @property
    def label(self) -> str:
        return self.kind

    def apply(self, u, periodic: bool | None = None) -> np.ndarray:
        """Filter an array (or Field) along every axis."""
        values, grid = (u.values, u.grid) if isinstance(u, Field) else (np.asarray(u), None)
        if self.kind == "spectral":
            if grid is not None and not grid.periodic:
                raise UnsupportedFeatureError("the spectral filter requires a periodic grid")
            if periodic is False:
                raise UnsupportedFeatureError("the spectral filter requires periodic data")
            line = _spectral_line
        elif self.kind == "interp1":
            line = lambda v, ax: _block_fit_line(v, ax, self.degree, self.hf_terms)  # noqa: E731
        elif self.kind == "interp2":
            line = lambda v, ax: _sliding_pair_line(v, ax, self.degree, self.hf_terms)  # noqa: E731
        else:
            line = lambda v, ax: _savgol_line(v, ax, self.degree, self.m)  # noqa: E731
        out = values
        for ax in range(values.ndim):
            out = line(out, ax)
        return out


def _wrap(u, out):
    return Field(out, u.grid, u.time) if isinstance(u, Field) else out


# {{{ spectral


def _spectral_line(v, axis):
    n = v.shape[axis]
    if n % 2:
        raise UnsupportedFeatureError(f"spectral filter needs an even node count, got {n}")
    half_cells = n // 4  # n = 2N nodes, keep |k| <= N/2
    k = np.fft.fftfreq(n, 1.0 / n)
    # the +-N/2 pair is kept whole, so real data stays real
    mask = np.abs(k) <= half_cells
    shape = [1] * v.ndim
    shape[axis] = n
    spec = np.fft.fft(v, axis=axis) * mask.reshape(shape)
    out = np.fft.ifft(spec, axis=axis)
    return out.real if np.isrealobj(v) else out


def spectral_filter(u):
    """Zero every Fourier mode with ``|k| > N/2`` of 1D periodic data on 2N nodes."""
    values = u.values if isinstance(u, Field) else np.asarray(u)
    if isinstance(u, Field):
        if not u.grid.periodic:
            raise UnsupportedFeatureError("the spectral filter requires a periodic grid")
        if u.grid.dim != 1:
            raise UnsupportedFeatureError("use spectral_filter_2d for 2D data")
    return _wrap(u, _spectral_line(values, values.ndim - 1))


def spectral_filter_2d(u):
    values = u.values if isinstance(u, Field) else np.asarray(u)
    if isinstance(u, Field) and not u.grid.periodic:
        raise UnsupportedFeatureError("the spectral filter requires a periodic grid")
    if values.ndim != 2:
        raise UnsupportedFeatureError(f"expected 2D data, got {values.ndim}D")
    out = _spectral_line(_spectral_line(values, 1), 0)
    return _wrap(u, out)


# }}}


# {{{ least-squares fits


@lru_cache(maxsize=None)
def _fit_matrix(width: int, degree: int, targets: tuple, hf_terms: int = 0) -> np.ndarray:
    """Rows map ``width`` equispaced samples to the LS fit evaluated at ``targets``.

    With ``hf_terms = q`` the basis also holds ``(-1)^j x^k`` for ``k < q``;
    those coefficients are fitted but dropped on evaluation, which removes
    the node-alternating (high-frequency) content instead of letting part
    of it leak into the polynomial. Built in exact rational arithmetic: the
    normal equations are too ill-conditioned for floating point to keep the
    fit exact on polynomials at the 1e-13 level.
    """
    # odd integer abscissae 2j - (width - 1) centre the window; the fit is scale invariant
    x = [sp.Integer(2 * j - (width - 1)) for j in range(width)]
    V = sp.Matrix([[xi**k for k in range(degree + 1)] + [(-1) ** j * xi**k for k in range(hf_terms)] for j, xi in enumerate(x)])
    if V.rank() < V.shape[1]:
        raise ValueError(f"{width} nodes cannot determine a degree-{degree} fit with {hf_terms} alternating terms")
    T = sp.Matrix(
        [[sp.Integer(2 * t - (width - 1)) ** k for k in range(degree + 1)] + [0] * hf_terms for t in targets]
    )
    P = T * (V.T * V).inv() * V.T
    return np.array(P.tolist(), dtype=float)


def _check_len(n, need, what):
    if n < need:
        raise UnsupportedFeatureError(f"{what} needs at least {need} nodes, got {n}")


def _block_fit_line(v, axis, degree, hf_terms=2):
    v = np.moveaxis(np.asarray(v), axis, -1)
    n = v.shape[-1]
    _check_len(n, BLOCK, "interp1")
    P = _fit_matrix(BLOCK, degree, tuple(range(BLOCK)), hf_terms)
    out = np.empty_like(v)
    starts = list(range(0, n - BLOCK + 1, BLOCK))
    if starts[-1] + BLOCK < n:
        starts.append(n - BLOCK)  # overlap taken from this later block
    for s in starts:
        out[..., s : s + BLOCK] = v[..., s : s + BLOCK] @ P.T
    return np.moveaxis(out, -1, axis)


def _sliding_pair_line(v, axis, degree, hf_terms=2):
    v = np.moveaxis(np.asarray(v), axis, -1)
    n = v.shape[-1]
    _check_len(n, BLOCK, "interp2")
    half = BLOCK // 2
    out = np.empty_like(v)
    head = _fit_matrix(BLOCK, degree, tuple(range(half)), hf_terms)
    tail = _fit_matrix(BLOCK, degree, tuple(range(half, BLOCK)), hf_terms)
    out[..., :half] = v[..., :BLOCK] @ head.T
    out[..., n - half :] = v[..., n - BLOCK :] @ tail.T
    # pair (p, p+1) sits at positions 5, 6 of the window p-5 .. p+6
    pair = _fit_matrix(BLOCK, degree, (half - 1, half), hf_terms)
    p = half
    while p < n - half:
        q = min(p + 1, n - half - 1)
        vals = v[..., p - (half - 1) : p + half + 1] @ pair.T
        out[..., p : q + 1] = vals[..., : q - p + 1]
        p += 2
    return np.moveaxis(out, -1, axis)


def _savgol_line(v, axis, degree, m):
    v = np.moveaxis(np.asarray(v), axis, -1)
    n = v.shape[-1]
    width = 2 * m + 1
    _check_len(n, width, "Savitzky-Golay")
    out = np.empty_like(v)
    centre = _fit_matrix(width, degree, (m,))[0]
    # interior: correlate with the centre row
    for k in range(width):
        if k == 0:
            acc = centre[k] * v[..., k : n - width + 1 + k]
        else:
            acc = acc + centre[k] * v[..., k : n - width + 1 + k]
    out[..., m : n - m] = acc
    edge_l = _fit_matrix(width, degree, tuple(range(m)))
    edge_r = _fit_matrix(width, degree, tuple(range(m + 1, width)))
    out[..., :m] = v[..., :width] @ edge_l.T
    out[..., n - m :] = v[..., n - width :] @ edge_r.T
    return np.moveaxis(out, -1, axis)


def interp_filter_first(u, degree: int = 6, hf_terms: int = 2):
    """Replace each block of 12 consecutive nodes by its degree-``degree`` LS fit.

    ``hf_terms=0`` gives the plain polynomial fit.
    """
    values = u.values if isinstance(u, Field) else np.asarray(u)
    return _wrap(u, FilterSpec("interp1", degree, hf_terms=hf_terms).apply(values))


def interp_filter_second(u, degree: int = 6, hf_terms: int = 2):
    """Sliding 12-node LS fit evaluated on the central pair of each window."""
    values = u.values if isinstance(u, Field) else np.asarray(u)
    return _wrap(u, FilterSpec("interp2", degree, hf_terms=hf_terms).apply(values))


def savitzky_golay(u, n: int = 6, m: int = 5):
    values = u.values if isinstance(u, Field) else np.asarray(u)
    return _wrap(u, FilterSpec("savitzky_golay", n, m).apply(values))


def apply_filter(u, spec: FilterSpec | str | None):
    if spec is None:
        return u
    if isinstance(spec, str):
        spec = FilterSpec(spec)
    values = u.values if isinstance(u, Field) else np.asarray(u)
    periodic = u.grid.periodic if isinstance(u, Field) else None
    return _wrap(u, spec.apply(u if isinstance(u, Field) else values, periodic))


# }}}
