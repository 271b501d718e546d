import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from qpmathieu import cli
from qpmathieu.sweep import read_pgm


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rational_parsing():
    assert cli.rational("435/800") == Fraction(87, 160)
    assert cli.rational("2") == 2
    for bad in ("1/0", "a/b", "-1/2", "0"):
        with pytest.raises(Exception):
            cli.rational(bad)


def test_point_stable_island(capsys):
    code, out, _ = run(capsys, "point", "--alpha", "435/800", "--beta", "425/800",
                       "--eps", "0.1")
    assert code == 0
    assert "verdict: stable" in out
    assert "saddle-centre" in out
    assert "320 pi" in out


def test_point_unstable(capsys):
    code, out, _ = run(capsys, "point", "--alpha", "436/800", "--beta", "425/800",
                       "--eps", "0.1")
    assert code == 0 and "verdict: unstable" in out


def test_point_unforced(capsys):
    code, out, _ = run(capsys, "point", "--alpha", "1/2", "--beta", "1/3", "--eps", "0")
    assert code == 0
    lines = [ln.split()[0] for ln in out.splitlines() if ln.startswith("  ")]
    assert lines == ["1+0i"] * 4
    assert "verdict: stable" in out


def test_usage_errors(capsys):
    assert run(capsys, "point", "--alpha", "1/0", "--beta", "1", "--eps", "0.1")[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "transition", "--eps", "0.1")[0] == 2
    assert run(capsys, "transition", "--eps", "0.1", "--N", "9", "--M", "2",
               "--scan-beta", "0.5", "--alpha-range", "0.2:0.3")[0] == 2
    assert run(capsys, "sweep", "--n", "800", "--out", "x")[0] == 2


def test_numerical_failure_exit_code(capsys, monkeypatch):
    from qpmathieu.floquet import EigenFailure

    def boom(*a, **k):
        raise EigenFailure("synthetic")

    monkeypatch.setattr(cli, "robust_monodromy", boom)
    code, _, err = run(capsys, "point", "--alpha", "1/2", "--beta", "1/3", "--eps", "0.1")
    assert code == 3 and "EigenFailure" in err


def test_sweep_files(tmp_path, capsys):
    prefix = str(tmp_path / "s")
    code, out, _ = run(capsys, "sweep", "--n", "10", "--eps", "0", "--workers", "1",
                       "--out", prefix)
    assert code == 0
    img = read_pgm((tmp_path / "s.pgm").read_bytes())
    assert img.shape == (10, 10) and not img.any()
    assert (tmp_path / "s.csv").read_text().count("\n") == 101
    manifest = (tmp_path / "s.manifest").read_text()
    assert "subcommand=sweep" in manifest and "version=" in manifest
    assert "duration_s=" in manifest and "s.csv" in manifest


def test_manifest_rerun_is_byte_identical(tmp_path, capsys):
    first = str(tmp_path / "a")
    assert run(capsys, "sweep", "--n", "8", "--eps", "0.2", "--workers", "1",
               "--out", first)[0] == 0
    second = str(tmp_path / "b")
    assert run(capsys, "rerun", first + ".manifest", "--out", second)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_too_many_failed_cells(tmp_path, capsys, monkeypatch):
    from qpmathieu.sweep import StabilityChart

    def fake(spec, workers=None):
        norms = np.ones((spec.n, spec.n))
        norms[0, :2] = np.nan
        return StabilityChart(spec, norms, [(1, 1, "x"), (2, 1, "x")])

    monkeypatch.setattr(cli, "run_sweep", fake)
    code, _, err = run(capsys, "sweep", "--n", "10", "--out", str(tmp_path / "f"))
    assert code == 3 and "2/100" in err


def test_transition_command(capsys, tmp_path):
    code, out, _ = run(capsys, "transition", "--variant", "squared", "--eps", "0.1",
                       "--scan-beta", "0.5", "--alpha-range", "0.25:0.35", "--samples", "60",
                       "--out", str(tmp_path / "t"))
    assert code == 0
    assert "alpha = 0.3354" in out
    assert (tmp_path / "t.csv").read_text().startswith("curve_id,alpha,beta\n")


def test_resonance_command(capsys):
    code, out, _ = run(capsys, "resonance", "--system", "mathieu", "--k", "4")
    assert code == 0
    for n in range(1, 5):
        assert f"delta = {n}^2/4" in out
    code, out, _ = run(capsys, "resonance", "--system", "squared", "--k", "1")
    assert "line slopes alpha/beta: " in out and "1/3" in out


def test_slowflow_command(capsys, tmp_path):
    code, out, _ = run(capsys, "slowflow", "--scan", "0.15:0.21:0.001",
                       "--out", str(tmp_path / "w"))
    assert code == 0
    assert "0.1810" in out and "0.1890" in out
    assert (tmp_path / "w.csv").read_text().startswith("mu,max_norm\n")


def test_overlay_command(capsys, tmp_path):
    prefix = str(tmp_path / "c")
    run(capsys, "sweep", "--n", "10", "--eps", "0.1", "--workers", "1", "--out", prefix)
    code, _, _ = run(capsys, "overlay", "--chart", prefix + ".csv", "--n", "10", "--eps", "0.1",
                     "--mu-window", "0.181:0.189", "--out", str(tmp_path / "o"))
    assert code == 0
    assert read_pgm((tmp_path / "o.pgm").read_bytes()).shape == (10, 10)
    code, _, _ = run(capsys, "overlay", "--chart", str(tmp_path / "missing.csv"), "--n", "10",
                     "--eps", "0.1", "--out", str(tmp_path / "o"))
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qpmathieu.cli", "resonance", "--system",
                           "mathieu", "--k", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "delta = 2^2/4" in proc.stdout
