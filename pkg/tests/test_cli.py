"""Tests for the command-line front end: run, catalog, verify."""

import pytest

from ghostmg.cli import main
from ghostmg.experiments import CSV_HEADER

SMOKE_CONFIG = """
experiment = smoke
dimension = 1
n = 8, 16
theta1 = 0.5
iterations = 12
window = 9, 12
"""


def write_config(tmp_path, text, output):
    path = tmp_path / "sweep.cfg"
    path.write_text(text + f"output = {output}\n")
    return path


def test_run_writes_the_csv_and_exits_zero(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    config = write_config(tmp_path, SMOKE_CONFIG, out)
    assert main(["run", str(config)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3
    assert f"wrote 2 rows to {out}" in capsys.readouterr().out


def test_run_reports_failed_points_with_exit_one(tmp_path, capsys):
    # n = 4 cannot reach the V-cycle's coarsest size 8; the other point runs.
    out = tmp_path / "rows.csv"
    config = write_config(
        tmp_path,
        "experiment = smoke\ndimension = 1\nn = 4, 16\ntheta1 = 0.5\n"
        "cycle = v\niterations = 12\nwindow = 9, 12\n",
        out)
    assert main(["run", str(config)]) == 1
    captured = capsys.readouterr()
    assert "point failed (n=4" in captured.err
    assert "(1 failed)" in captured.out
    assert len(out.read_text().splitlines()) == 3  # both rows still written


def test_run_with_a_missing_config_exits_two(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_with_a_malformed_config_exits_two(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("experiment = x\ndimension = 1\nbogus = 1\n")
    assert main(["run", str(config)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_run_accuracy_experiment_writes_ratio_table(tmp_path, capsys):
    out = tmp_path / "acc.csv"
    config = write_config(
        tmp_path,
        "experiment = accuracy\ndimension = 1\nn = 8, 16\ntheta1 = 0.5\n",
        out)
    assert main(["run", str(config)]) == 0
    captured = capsys.readouterr().out
    assert "ratio=" in captured
    lines = out.read_text().splitlines()
    assert lines[0].startswith("domain,dim,n,h,linf_error")
    assert len(lines) == 3


def test_catalog_lists_the_interval_and_every_domain(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    for name in ("interval", "annulus", "disk", "flower", "hourglass",
                 "leaf", "rectangle"):
        assert name in out


def test_catalog_marks_region_dependent_boundary_conditions(capsys):
    main(["catalog"])
    out = capsys.readouterr().out
    leaf_line = next(line for line in out.splitlines()
                     if line.startswith("leaf"))
    assert "dirichlet/neumann by region" in leaf_line
    disk_line = next(line for line in out.splitlines()
                     if line.startswith("disk"))
    assert "dirichlet" in disk_line


def test_verify_passes_all_checks(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 5
    assert "[FAIL]" not in out
    assert "5/5 checks passed" in out


def test_main_requires_a_subcommand(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_main_rejects_unknown_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["frobnicate"])
