import numpy as np
import pytest

from eisbfd.cli import field_from_csv, field_to_csv, main, parse_c
from eisbfd.harness import C_OPTIMAL


def test_parse_c():
    assert parse_c("optimal") == C_OPTIMAL
    assert parse_c("-4/13") == C_OPTIMAL
    assert parse_c("0.25") == 0.25


@pytest.mark.parametrize(
    "argv",
    [
        ["solve1d", "--n", "2"],
        ["solve", "--n", "8", "--c", "2"],
        ["solve", "--case", "nosuchcase"],
        ["solve", "--c", "abc"],
        ["symbols", "--n", "1"],
        ["filter"],
        ["bogus"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage error" in capsys.readouterr().err


def test_size_message(capsys):
    main(["solve1d", "--n", "2"])
    assert "N=2" in capsys.readouterr().err


def test_solve_writes_field(tmp_path, capsys):
    assert main(["solve", "--case", "dirichlet1d", "--n", "12", "--c", "optimal", "--t-final", "0.1", "--out", str(tmp_path)]) == 0
    assert "err_l2=" in capsys.readouterr().out
    coords, values = field_from_csv((tmp_path / "solve_dirichlet1d_N12.csv").read_text())
    assert values.shape == (24,) and np.all(np.diff(coords[0]) > 0)


def test_dt_above_bound_is_refused(capsys):
    assert main(["solve", "--n", "12", "--dt", "0.1", "--t-final", "0.2"]) == 2
    assert "time step" in capsys.readouterr().err


def test_divergence_exits_1(capsys):
    code = main(["solve", "--case", "mode1d_k1", "--n", "16", "--dt", "0.05", "--t-final", "20", "--allow-unstable"])
    assert code == 1
    assert "numerical failure" in capsys.readouterr().err


def test_stability_check(tmp_path, capsys):
    assert main(["stability-check", "--c-samples", "201", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "stability.csv").read_text().count("\n") == 202


def test_dg_check(capsys):
    assert main(["dg-check"]) == 0
    out = capsys.readouterr().out
    assert "baumann_oden" in out and "False" not in out


def test_symbols_csv(capsys):
    assert main(["symbols", "--n", "8", "--c", "optimal"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "omega,q1,q2,abs_r1,abs_r2" and len(lines) == 9


def test_filter_round_trip(tmp_path, capsys):
    x = np.linspace(0, 1, 24, endpoint=False) + 1 / 48
    u = 1 + x**3 - 2 * x**5
    src = tmp_path / "u.csv"
    src.write_text(field_to_csv([x], u))
    assert main(["filter", "--kind", "interp2", "--input", str(src), "--out", str(tmp_path / "f.csv")]) == 0
    _, out = field_from_csv((tmp_path / "f.csv").read_text())
    assert np.allclose(out, u, atol=1e-12)


def test_field_csv_2d_round_trip():
    x = np.arange(4.0)
    y = np.arange(3.0) / 3
    vals = np.arange(12.0).reshape(4, 3)
    coords, back = field_from_csv(field_to_csv([x, y], vals))
    assert np.array_equal(back, vals) and np.array_equal(coords[1], y)


def test_convergence_is_deterministic_and_config_merges(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("case = mode1d_k1\nn = 16,24,32\nc = optimal\nfilter = spectral\n")
    argv = ["convergence", "--config", str(cfg), "--out", str(tmp_path / "a")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0].startswith("case,N,h,c,filter")
    # a flag overrides the config value
    assert main(["convergence", "--config", str(cfg), "--filter", "none"]) == 0
    assert ",none," in capsys.readouterr().out


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["solve", "--config", str(cfg)]) == 2
