import math
import subprocess
import sys

import numpy as np
import pytest

from amchooser import NonConvergence, cli, io
from amchooser.params import format_config

SMALL = ["--grid-m", "200", "--grid-n", "100"]


@pytest.fixture(scope="module")
def std_file(tmp_path_factory, std_cfg):
    path = tmp_path_factory.mktemp("cfg") / "std.cfg"
    path.write_text(format_config(std_cfg))
    return path


@pytest.fixture(scope="module")
def run1(tmp_path_factory, std_file):
    out = tmp_path_factory.mktemp("runs") / "run1"
    assert cli.main(["solve", "--config", str(std_file), "--method", "psor", "--out", str(out)]) == 0
    return out


def test_solve_writes_run_directory(run1):
    for name in ("chooser_surface.csv", "boundary_put.csv", "boundary_call.csv", "regions.csv", "manifest"):
        assert (run1 / name).is_file(), name
    man = io.read_manifest(run1 / "manifest")
    assert man["method"] == "psor" and man["config.M"] == "800"
    for key, val in man.items():
        if key.startswith("file."):
            assert (run1 / val).is_file()
    assert "residual.chooser.max" in man and "time.chooser_s" in man


def test_solve_penalty_records_eps_and_k0(tmp_path):
    out = tmp_path / "runp"
    assert cli.main(["solve", "--method", "penalty", "--eps", "1e-3", *SMALL, "--out", str(out)]) == 0
    man = io.read_manifest(out / "manifest")
    assert float(man["penalty_eps"]) == 1e-3
    assert float(man["penalty_k0"]) > 0


def test_missing_config(tmp_path, capsys):
    code = cli.main(["solve", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "config not found" in capsys.readouterr().err


def test_rejected_params_exit_2(tmp_path, capsys):
    assert cli.main(["solve", "--k-put", "120", *SMALL, "--out", str(tmp_path / "o")]) == 2
    assert "K_p < K_c violated" in capsys.readouterr().err


def test_nonconvergence_exit_3(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NonConvergence("stalled", history=[1.0], level=3)

    monkeypatch.setattr(cli, "run_pipeline", boom)
    assert cli.main(["solve", *SMALL, "--out", str(tmp_path / "o")]) == 3
    assert "[solver]" in capsys.readouterr().err


def test_verify_standard_exit_0(std_file, tmp_path, capsys):
    report = tmp_path / "report.tsv"
    assert cli.main(["verify", "--config", str(std_file), "--report", str(report)]) == 0
    assert "0 failed" in capsys.readouterr().out
    assert report.read_text().startswith("# fingerprint\t")


def test_verify_fault_injection_exit_1(std_file, capsys):
    assert cli.main(["verify", "--config", str(std_file), "--inject-fault", "--spots", "100"]) == 1
    assert "chooser.obstacle_dominance" in capsys.readouterr().err


def test_verify_degenerate_exit_0(capsys):
    assert cli.main(["verify", "--q", "0", "--degenerate-q0", "--spots", "100"]) == 0
    out = capsys.readouterr().out
    assert "SKIPPED" in out and "0 failed" in out


def test_figures(run1):
    assert cli.main(["figures", str(run1)]) == 0
    head, *rows = (run1 / "fig3_chooser_boundaries.csv").read_text().splitlines()
    assert head == "tau,x_put_side,x_call_side"
    xp = np.array([float(r.split(",")[1]) for r in rows])
    xc = np.array([float(r.split(",")[2]) for r in rows])
    xp, xc = xp[~np.isnan(xp)], xc[~np.isnan(xc)]
    assert np.all(np.diff(xp) <= 0) and np.all(np.diff(xc) >= 0)

    head, *rows = (run1 / "fig2_solution_slices.csv").read_text().splitlines()
    data = np.array([[float(v) for v in r.split(",")] for r in rows])
    assert len(np.unique(data[:, 0])) == 4
    assert np.all(data[:, 2] >= data[:, 3])

    head, *rows = (run1 / "fig1_vanilla_boundaries.csv").read_text().splitlines()
    data = np.array([[float(v) for v in r.split(",")] for r in rows])
    xc1, xp1 = data[:, 1], data[:, 2]
    assert np.all(xc1[~np.isnan(xc1)] >= math.log(110))
    assert np.all(xp1[~np.isnan(xp1)] <= math.log(90))


def test_figures_missing_run(tmp_path, capsys):
    assert cli.main(["figures", str(tmp_path / "nothing")]) == 2
    assert "run directory not found" in capsys.readouterr().err


def test_compare_oracle_standard(capsys):
    assert cli.main(["compare-oracle", "--spots", "80", "100", "120"]) == 0
    head, *rows = capsys.readouterr().out.splitlines()
    assert head == "spot,contract,pde,lattice,rel_gap"
    chooser = [r.split(",") for r in rows if r.split(",")[1] == "chooser"]
    assert len(chooser) == 3 and all(float(r[4]) <= 5e-3 for r in chooser)


def test_compare_oracle_edge_spot_warns(capsys):
    from amchooser import validate
    from conftest import market

    L = validate(market(), None).numerics.L
    assert cli.main(["compare-oracle", *SMALL, "--spots", repr(math.exp(-L))]) == 0
    cap = capsys.readouterr()
    assert "warning" in cap.err
    assert len(cap.out.splitlines()) == 4


def test_compare_oracle_empty(capsys):
    assert cli.main(["compare-oracle", "--spots"]) == 0
    assert capsys.readouterr().out == "spot,contract,pde,lattice,rel_gap\n"


@pytest.mark.parametrize("kind", ["eps", "grid"])
def test_sweep_parallel_matches_serial(kind, tmp_path):
    args = ["sweep", "--kind", kind, "--levels", "2", "--grid-m", "100", "--grid-n", "50"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main([*args, "--jobs", "1", "--out", str(a)]) == 0
    assert cli.main([*args, "--jobs", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert len(rows) == 3


def test_console_script_usage_error():
    out = subprocess.run([sys.executable, "-m", "amchooser.cli", "solve", "--method", "bogus"],
                         capture_output=True, text=True)
    assert out.returncode == 2
