"""Command-line front end.

Exit codes: 0 on success, 1 on a numerical failure (divergence, failed
certificate or equivalence check), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dg_equiv, harness, stability, symbols
from .filters import KINDS, FilterSpec, _ALIASES
from .timestepper import DivergenceError, StabilityBoundError

log = logging.getLogger("eisbfd")

SUBCOMMANDS = ("solve", "convergence", "symbols", "stability-check", "dg-check", "filter")
MIN_CELLS = 3


class UsageError(Exception):
    pass


def parse_c(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    if s == "optimal":
        return harness.C_OPTIMAL
    try:
        return float(Fraction(s)) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--c: expected a number, a fraction or 'optimal', got {text!r}") from None


def parse_ints(text) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"--n: expected integers, got {text!r}") from None


def parse_filters(text) -> list:
    out = []
    for name in str(text).split(","):
        name = name.strip().lower()
        if name in ("", "none"):
            out.append(None)
            continue
        try:
            out.append(FilterSpec(name))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return out


def read_config(path) -> dict:
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"config line {raw!r} is not key=value")
        cfg[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    return cfg


# {{{ field csv

def field_to_csv(coords, values, extra: dict | None = None) -> str:
    """One row per node: ``x[,y],u`` plus any extra columns, nodes in C order."""
    names = ["x", "y", "z"][: len(coords)]
    mesh = np.meshgrid(*coords, indexing="ij")
    cols = {n: m.ravel() for n, m in zip(names, mesh)}
    cols["u"] = np.asarray(values, dtype=float).ravel()
    for k, v in (extra or {}).items():
        cols[k] = np.asarray(v, dtype=float).ravel()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(cols))
    for row in zip(*cols.values()):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def field_from_csv(text: str):
    """Inverse of :func:`field_to_csv`; returns (coords, values)."""
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise UsageError("field CSV has no data rows")
    header = [h.strip() for h in rows[0]]
    if "u" not in header:
        raise UsageError("field CSV needs a 'u' column")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise UsageError(f"field CSV: {exc}") from None
    axes = [h for h in ("x", "y", "z") if h in header]
    if not axes:
        raise UsageError("field CSV needs an 'x' column")
    coords = [np.unique(data[:, header.index(a)]) for a in axes]
    shape = tuple(len(c) for c in coords)
    if int(np.prod(shape)) != len(data):
        raise UsageError(f"field CSV: {len(data)} rows do not form a {shape} tensor grid")
    order = np.lexsort([data[:, header.index(a)] for a in reversed(axes)])
    values = data[order, header.index("u")].reshape(shape)
    return coords, values


# }}}


def _emit(text: str, out, name: str):
    sys.stdout.write(text)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


def _resolve_case(args):
    cases = harness.builtin_cases()
    name = args.case or "dirichlet1d"
    if name in cases:
        case = cases[name]
    elif Path(name).is_file():
        try:
            case = harness.case_from_file(name)
        except harness.HarnessError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError(f"--case: unknown case {name!r}; builtins are {', '.join(cases)} or give a file path")
    if args.c is not None:
        case = case.with_c(parse_c(args.c))
    if args.n is not None:
        case = case.with_resolutions(parse_ints(args.n))
    elif getattr(args, "reduced", False):
        case = harness.reduced_ladder(case)
    if args.t_final is not None:
        case = replace(case, t_final=float(args.t_final))
    _check_c(case.c, args.allow_unstable)
    for n in case.resolutions:
        if n < MIN_CELLS:
            raise UsageError(f"--n: grid size check failed, N={n} but at least {MIN_CELLS} cells are required")
    return case


def _check_c(c, allow_unstable):
    if not -1 <= c <= 1 and not allow_unstable:
        raise UsageError(f"--c: stability range check failed, c={c} is outside [-1, 1] (pass --allow-unstable)")


def _dt(args):
    return None if args.dt is None else float(args.dt)


def cmd_solve(args) -> int:
    case = _resolve_case(args)
    n = case.resolutions[0]
    if len(case.resolutions) > 1:
        raise UsageError("solve takes a single --n")
    specs = parse_filters(args.filter or "none")
    if len(specs) != 1:
        raise UsageError("solve takes a single --filter")
    res = harness.run_case(
        case, n, specs[0], dt=_dt(args), safety=float(args.safety), allow_unstable_dt=args.allow_unstable
    )
    grid = res.field.grid
    err = harness.filtered_error(res, specs[0])
    text = field_to_csv(grid.coordinates(), res.field.values, {"exact": res.exact_final, "error": err})
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"solve_{case.name}_N{n}.csv").write_text(text)
    print(f"case={case.name} N={n} c={case.c!r} dt={res.dt!r} filter={res.filter} "
          f"err_l2={res.norms.l2!r} err_linf={res.norms.linf!r}")
    return 0


def cmd_convergence(args) -> int:
    case = _resolve_case(args)
    specs = parse_filters(args.filter or "none")
    reports = harness.convergence_study(
        case, specs, dt=_dt(args), safety=float(args.safety), verify_dt=args.verify_dt, dt_tol=float(args.tol or 0.01)
    )
    if args.out:
        for r in reports:
            r.write(args.out)
    _emit(harness.reports_csv(reports), args.out, f"{case.name}_convergence.csv")
    for r in reports:
        log.info("%s filter=%s slope_fit=%.3f", r.case, r.filter, r.slope_fit)
    return 0


def cmd_symbols(args) -> int:
    ns = parse_ints(args.n or "16")
    if len(ns) != 1:
        raise UsageError("symbols takes a single --n")
    n = ns[0]
    if n < MIN_CELLS:
        raise UsageError(f"--n: grid size check failed, N={n} but at least {MIN_CELLS} cells are required")
    c = parse_c(args.c if args.c is not None else 0.0)
    _check_c(c, args.allow_unstable)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "q1", "q2", "abs_r1", "abs_r2"])
    lo = -(n // 2) + (1 if n % 2 == 0 else 0)
    for omega in range(lo, n // 2 + 1):
        s = symbols.compute_symbols(omega, n, c)
        r1 = "" if s.r1 is None else repr(float(abs(s.r1)))
        r2 = "" if s.r2 is None else repr(float(abs(s.r2)))
        w.writerow([omega, repr(float(s.q1)), repr(float(s.q2)), r1, r2])
    _emit(buf.getvalue(), args.out, f"symbols_N{n}_c{c:+.6f}.csv")
    return 0


def cmd_stability(args) -> int:
    k = int(args.c_samples)
    if k < 2:
        raise UsageError("--c-samples must be at least 2")
    tol = float(args.tol or 1e-10)
    report = stability.certify_interior(np.linspace(-1.0, 1.0, k), tol=tol)
    _emit(report.to_csv(), args.out, "stability.csv")
    bad = report.failures()
    if bad:
        print(f"stability certificate failed at {len(bad)} of {k} samples, first c={bad[0].c!r}", file=sys.stderr)
        return 1
    print(f"stability certificate passed at all {k} samples", file=sys.stderr)
    return 0


DG_C_VALUES = (-1.0, harness.C_OPTIMAL, -0.25, 0.0, 1.0)
DG_FLUX_PAIRS = ((0.5, 0.5), (0.25, 0.75), (1.0, 0.0))


def cmd_dg(args) -> int:
    tol = float(args.tol or 1e-12)
    lines = ["c,alpha,beta,max_rel_diff,passed"]
    ok = True
    for chk in dg_equiv.equivalence_report(DG_C_VALUES, DG_FLUX_PAIRS):
        good = chk.max_diff <= tol
        ok &= good
        lines.append(f"{float(chk.c)!r},{float(chk.alpha)!r},{float(chk.beta)!r},{float(chk.max_diff)!r},{good}")
    bo = dg_equiv.dg_blocks_from_weak_form(dg_equiv.PenaltyCoefficients.baumann_oden(), 1, exact=True)
    bo_diff = float(bo.as_float().max_abs_diff(dg_equiv.baumann_oden_blocks(1.0)))
    ok &= bo_diff == 0
    lines.append(f"baumann_oden,,,{bo_diff!r},{bo_diff == 0}")
    _emit("\n".join(lines) + "\n", args.out, "dg_check.csv")
    if not ok:
        print("DG equivalence check failed", file=sys.stderr)
        return 1
    return 0


def cmd_filter(args) -> int:
    if not args.kind:
        raise UsageError("filter needs --kind")
    kind = _ALIASES.get(args.kind, args.kind)
    if kind not in KINDS:
        raise UsageError(f"--kind: unknown filter {args.kind!r}")
    src = sys.stdin.read() if args.input in (None, "-") else _read(args.input)
    coords, values = field_from_csv(src)
    out = FilterSpec(kind).apply(values, periodic=True if kind == "spectral" else None)
    text = field_to_csv(coords, out)
    if args.out:
        target = Path(args.out)
        if target.suffix.lower() != ".csv":
            target.mkdir(parents=True, exist_ok=True)
            target = target / f"filtered_{kind}.csv"
        target.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "symbols": cmd_symbols,
    "stability-check": cmd_stability,
    "dg-check": cmd_dg,
    "filter": cmd_filter,
}

# flag defaults, applied after the config file so that explicit flags win
DEFAULTS = {"safety": 0.5, "c_samples": 201, "allow_unstable": False, "verify_dt": False, "reduced": False}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eisbfd", description="Block finite-difference heat solver and verification tools.")
    p.add_argument("--config", help="key=value file mirroring the flags; flags win")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        aliases = ["solve1d"] if name == "solve" else []
        s = sub.add_parser(name, aliases=aliases)
        s.set_defaults(command=name)
        s.add_argument("--config", dest="sub_config")
        s.add_argument("--case")
        s.add_argument("--n", help="cells per direction; a comma list for convergence")
        s.add_argument("--c", help="block parameter, a decimal, a fraction or 'optimal' (-4/13)")
        s.add_argument("--filter", help="none, spectral, interp1, interp2, sg; comma list allowed")
        s.add_argument("--kind", help="filter kind for the filter subcommand")
        s.add_argument("--input", help="field CSV for the filter subcommand ('-' for stdin)")
        s.add_argument("--dt", type=float)
        s.add_argument("--safety", type=float)
        s.add_argument("--t-final", type=float)
        s.add_argument("--out")
        s.add_argument("--allow-unstable", action="store_const", const=True)
        s.add_argument("--verify-dt", action="store_const", const=True)
        s.add_argument("--reduced", action="store_const", const=True, help="use the CI-sized 2D ladder")
        s.add_argument("--c-samples", type=int)
        s.add_argument("--tol", type=float)
    return p


def _merge_config(args):
    path = getattr(args, "sub_config", None) or args.config
    cfg = read_config(path) if path else {}
    known = vars(args)
    for key, val in cfg.items():
        if key not in known or key in ("command", "config", "sub_config"):
            raise UsageError(f"config: unknown key {key!r}")
        if known[key] is None:
            if key in ("allow_unstable", "verify_dt", "reduced"):
                val = val.lower() in ("1", "true", "yes", "on")
            setattr(args, key, val)
    for key, val in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    return args


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError(f"choose a subcommand: {', '.join(SUBCOMMANDS)}")
        args = _merge_config(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except StabilityBoundError as exc:
        print(f"usage error: time step check failed: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, harness.HarnessError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
