import csv

import mpmath
import numpy as np
import pytest

from biotprec.bench import cli, runner, tables
from biotprec.bench.mandel import mandel_constants, mandel_pressure, mandel_roots
from biotprec.bench.problems import MandelConfig


def test_mandel_roots_residual_and_brackets():
    cfg = MandelConfig(nu=0.2)
    assert cfg.nu_u == pytest.approx(0.5)
    kappa = (1 - cfg.nu) / (cfg.nu_u - cfg.nu)
    assert kappa == pytest.approx(8 / 3)
    r = mandel_roots(cfg.nu, cfg.nu_u, 50)
    n = np.arange(50)
    assert np.all((r > n * np.pi) & (r < n * np.pi + np.pi / 2))
    assert np.all(np.diff(r) > 0)
    assert np.max(np.abs(np.sin(r) - kappa * r * np.cos(r)) / r) < 1e-12
    # second root, independent bisection with mpmath
    ref = mpmath.findroot(lambda x: mpmath.tan(x) - kappa * x, (np.pi + 1e-9, 1.5 * np.pi - 1e-9),
                          solver="bisect")
    assert abs(r[1] - float(ref)) < 1e-12


def test_mandel_roots_large_kappa_limit():
    prev = None
    for gap in (1e-1, 1e-2, 1e-3, 1e-4):
        r = mandel_roots(0.2, 0.2 + gap, 5)
        d = (np.arange(5) * np.pi + np.pi / 2) - r
        assert np.all(d > 0)
        if prev is not None:
            assert np.all(d < prev)
        prev = d
    assert prev.max() < 1e-3


def test_mandel_roots_degenerate():
    with pytest.raises(ValueError):
        mandel_roots(0.3, 0.3, 5)


def test_mandel_pressure_drained_edge_and_decay():
    cfg = MandelConfig(nu=0.2)
    assert np.all(mandel_pressure([1.0], 0.01, cfg) == pytest.approx(0.0, abs=1e-9))
    p0, c = mandel_constants(cfg)
    assert np.max(np.abs(mandel_pressure([0.0, 0.5], 1e3 / c, cfg))) < 1e-12 * p0
    with pytest.raises(ValueError):
        mandel_pressure([0.0], -1.0, cfg)


def test_mandel_pressure_initial_plateau():
    cfg = MandelConfig(nu=0.2)
    p0, _ = mandel_constants(cfg)
    p = mandel_pressure([0.2, 0.5, 0.8], 1e-7, cfg)
    assert np.allclose(p, p0, rtol=1e-3)


def _mp_pressure(x, t, cfg, terms=200):
    mpmath.mp.dps = 40
    p0, c = mandel_constants(cfg)
    kappa = mpmath.mpf(1 - cfg.nu) / (mpmath.mpf(cfg.nu_u) - cfg.nu)
    s = mpmath.mpf(0)
    for n in range(terms):
        lo, hi = n * mpmath.pi + mpmath.mpf("1e-30"), n * mpmath.pi + mpmath.pi / 2 - mpmath.mpf("1e-30")
        a = mpmath.findroot(lambda z: mpmath.sin(z) - kappa * z * mpmath.cos(z), (lo, hi), solver="anderson")
        coef = mpmath.sin(a) / (a - mpmath.sin(a) * mpmath.cos(a)) * mpmath.exp(-a * a * c * t / cfg.a ** 2)
        s += coef * (mpmath.cos(a * x / cfg.a) - mpmath.cos(a))
    return float(2 * p0 * s)


def test_mandel_pressure_vs_extended_precision():
    cfg = MandelConfig(nu=0.2, k=1e-6)
    ref = _mp_pressure(0, 0.01, cfg)
    val = mandel_pressure([0.0], 0.01, cfg)[0]
    assert abs(val - ref) / abs(ref) < 1e-10


def test_run_case_eliminated_upper():
    rep = runner.run_case("mandel2d", 16, 0.1, 0.0, 1e-6, "bue")
    assert rep.converged and abs(rep.iterations - 23) <= 4


@pytest.mark.xfail(strict=True, reason="tied-plate single-step benchmark converges faster than the "
                   "published count (32 against 39)")
def test_run_case_full_diagonal():
    rep = runner.run_case("mandel2d", 8, 0.1, 0.0, 1e-6, "bd")
    assert rep.converged and abs(rep.iterations - 39) <= 4


@pytest.mark.xfail(strict=True, reason="Kuhn tetrahedra footing converges faster than the published "
                   "count (21 against 34)")
def test_run_case_footing_inexact_lower():
    rep = runner.run_case("footing3d", 8, 0.01, 0.2, 1e-6, "bl", inexact=True)
    assert rep.converged and abs(rep.iterations - 34) <= 6


def test_run_case_errors():
    with pytest.raises(ValueError):
        runner.run_case("beam", 4, 0.1)
    with pytest.raises(ValueError):
        runner.run_case("mandel2d", 4, 0.1, pid="bz")


def test_sweep_rows_and_determinism(tmp_path):
    spec = runner.SweepSpec(Ns=[2, 3, 4, 5, 6], taus=list(tables.TAUS), preconds=["bl"])
    out = tmp_path / "a.csv"
    rows, summary = runner.run_sweep(spec, out)
    assert len(rows) == 20 and all(int(r["converged"]) for r in rows)
    runner.run_sweep(spec, tmp_path / "b.csv")

    def strip(path):
        with open(path) as fh:
            return [{k: v for k, v in r.items() if k not in runner.TIMING_COLUMNS} for r in csv.DictReader(fh)]
    a, b = strip(out), strip(tmp_path / "b.csv")
    assert a == b
    with open(out) as fh:
        assert fh.readline().strip() == ",".join(runner.CSV_COLUMNS)
    assert len(summary) == 1 and float(summary[0]["ratio"]) >= 1.0
    assert (tmp_path / "a.csv.summary.csv").exists()


def test_sweep_failure_recorded():
    spec = runner.SweepSpec(Ns=[2], taus=[0.0, 0.1], preconds=["bl"])
    rows, _ = runner.run_sweep(spec)
    assert rows[0]["converged"] == 0 and rows[0]["relres"].startswith("error")
    assert int(rows[1]["converged"]) == 1


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        runner.SweepSpec(taus=[])
    with pytest.raises(ValueError):
        runner.SweepSpec(preconds=["bx"])


def test_timing_scaling_needs_three_sizes():
    with pytest.raises(ValueError):
        runner.timing_scaling("mandel2d", "full", "bl", [4, 8])
    n, t, slope = runner.timing_scaling("mandel2d", "full", "bl", [2, 4, 8])
    assert list(n) == [8, 32, 128] and np.all(t > 0) and np.isfinite(slope)


def test_parse_h():
    assert cli.parse_h("1/64") == 64 and cli.parse_h("16") == 16
    for bad in ("3/64", "0", "-1/4"):
        with pytest.raises(ValueError):
            cli.parse_h(bad)


def test_config_file(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("# sweep\nproblem = mandel2d\nh = 1/2, 1/4\ntau=0.1,0.01\nprecond = bl,bu  # two\n"
                 "perm-jump = none\ninexact = false\n")
    spec = cli.spec_from_config(cli.read_config(p))
    assert spec.Ns == [2, 4] and spec.taus == [0.1, 0.01] and spec.preconds == ["bl", "bu"]
    assert spec.k_jumps == [None] and not spec.inexact
    with pytest.raises(ValueError):
        cli.spec_from_config({"bogus": "1"})
    p.write_text("h 1/2\n")
    with pytest.raises(ValueError):
        cli.read_config(p)


def test_cli_run_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert cli.main(["run", "--h", "1/4", "--tau", "0.1", "--precond", "bl", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(runner.CSV_COLUMNS)
    assert cli.main(["run", "--h", "1/4", "--precond", "bd", "--max-it", "2"]) == 1
    assert cli.main(["run", "--h", "3/7"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(f"h = 1/2\ntau = 0.1\nprecond = bl,ble\nout = {tmp_path / 'o.csv'}\n")
    assert cli.main(["sweep", "--spec", str(p)]) == 0
    assert len((tmp_path / "o.csv").read_text().splitlines()) == 3


@pytest.mark.parametrize("check", ["infsup", "fov", "inequalities", "lsl"])
def test_cli_analyze(check, capsys):
    assert cli.main(["analyze", "--h", "1/2", "--check", check]) == 0
    assert capsys.readouterr().out.strip()


def test_cli_export_mm(tmp_path):
    from biotprec.core_la import read_matrix_market
    assert cli.main(["export-mm", "--h", "1/2", "--out", str(tmp_path)]) == 0
    for variant in ("full", "diag", "elim"):
        A = read_matrix_market(tmp_path / f"{variant}.mtx")
        sizes = [int(l.split()[1]) for l in (tmp_path / f"{variant}_blocks.txt").read_text().splitlines()]
        assert sum(sizes) == A.shape[0] == np.loadtxt(tmp_path / f"{variant}_rhs.txt").size
