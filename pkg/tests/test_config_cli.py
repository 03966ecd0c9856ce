from __future__ import annotations

import csv
import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdrift.cli import main
from fracdrift.config import ConfigError, RunConfig, parse_config

SMALL = """
grid.h = 0.2
sweep.A = 0, 10
mc.n_paths = 2000
mc.dt = 0.002
mc.t_max = 0.6
mc.A = 0
series.spacing = 0.1
series.n_time = 32
series.points = 0.2:0; 0:0.3
"""


def _run(tmp_path, command, text, *extra):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def test_defaults_round_trip():
    cfg = RunConfig()
    assert parse_config(cfg.to_text()) == cfg
    assert parse_config(cfg.to_text()).digest == cfg.digest


@settings(max_examples=40, deadline=None)
@given(st.floats(1.01, 1.99), st.floats(0.01, 0.5),
       st.lists(st.floats(-500, 500), min_size=1, max_size=6), st.integers(0, 2**63))
def test_round_trip_property(alpha, h, amps, seed):
    cfg = RunConfig(alpha=alpha, grid_h=h, sweep_A=tuple(amps), seed=seed)
    back = parse_config(cfg.to_text())
    assert back == cfg


@pytest.mark.parametrize("line,key", [
    ("sweep.A =", "sweep.A"),
    ("alpha = 2.0", "alpha"),
    ("alpha = banana", "alpha"),
    ("grid.h = -1", "grid.h"),
    ("field.kind = swirl", "field.kind"),
    ("field.profile = taper:0.5", "field.profile"),
    ("mc.n_paths = 0", "mc.n_paths"),
    ("tol.svd = 2", "tol.svd"),
    ("series.points = 0:0", "series.points"),
    ("colour = blue", "colour"),
    ("field.kind = table", "field.table"),
])
def test_bad_values_name_the_key(line, key):
    with pytest.raises(ConfigError, match=re.escape(key)):
        parse_config(line)


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nalpha = 1.2  # trailing\n")
    assert cfg.alpha == 1.2


def test_cli_config_error_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "sweep", "sweep.A =\n")
    assert code == 2
    assert "sweep.A" in capsys.readouterr().err
    assert main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_too_coarse_grid_is_config_error(tmp_path, capsys):
    code, _ = _run(tmp_path, "sweep", "grid.h = 0.9\n")
    assert code == 2
    assert "grid.h" in capsys.readouterr().err


def test_cli_sweep_outputs(tmp_path):
    code, out = _run(tmp_path, "sweep", SMALL)
    assert code == 0
    rows = list(csv.reader(open(out / "sweep.csv")))
    assert rows[0] == ["A", "lambda", "iters", "residual", "seconds"]
    assert len(rows) == 3
    assert len(rows[1][1].replace(".", "").lstrip("0")) >= 15
    phi = list(csv.reader(open(out / "eigenfunction_A10.csv")))
    assert phi[0] == ["x1", "x2", "phi"]
    summary = json.load(open(out / "first_integrals.json"))
    assert summary["k"] > 0 and summary["lambda_limit_gap"] >= 0
    for name in ("sweep.csv", "first_integrals.json", "eigenfunction_A0.csv"):
        manifest = json.load(open(out / f"{name}.manifest.json"))
        assert manifest["config_hash"] == parse_config(SMALL).with_overrides(
            out_dir=str(out)).digest
        assert manifest["version"] and manifest["wall_time_seconds"] >= 0


def test_cli_constant_field_reports_empty_space(tmp_path):
    code, out = _run(tmp_path, "sweep", SMALL + "field.kind = constant\nsweep.A = 0, 40\n")
    assert code == 0
    summary = json.load(open(out / "first_integrals.json"))
    assert summary["k"] == 0 and summary["e_star"] == "inf"
    assert summary["lambda_limit_gap"] is None


def test_cli_checks_pass_and_fail(tmp_path, capsys):
    code, out = _run(tmp_path, "checks", SMALL.replace("grid.h = 0.2", "grid.h = 0.1"))
    report = json.load(open(out / "checks.json"))
    assert code == 0 and report["all_pass"]
    code, out = _run(tmp_path, "checks", SMALL + "field.kind = compressible\n")
    report = json.load(open(out / "checks.json"))
    assert code == 1
    assert not report["checks"]["skewness"]["pass"]


def test_cli_first_integrals(tmp_path):
    code, out = _run(tmp_path, "first-integrals", SMALL)
    assert code == 0
    assert (out / "singular_values.csv").exists() and (out / "minimizer.csv").exists()


def test_cli_mc_is_reproducible(tmp_path):
    code, out = _run(tmp_path, "mc", SMALL, "--seed", "5")
    assert code == 0
    first = (out / "survival_A0.csv").read_bytes(), (out / "mc_summary_A0.json").read_bytes()
    code, out = _run(tmp_path, "mc", SMALL, "--seed", "5")
    assert (out / "survival_A0.csv").read_bytes() == first[0]
    assert (out / "mc_summary_A0.json").read_bytes() == first[1]
    summary = json.loads(first[1])
    assert "consistent_with_grid" in summary and summary["seed"] == 5


def test_cli_mc_estimator_failure(tmp_path, capsys):
    code, _ = _run(tmp_path, "mc", SMALL.replace("mc.n_paths = 2000", "mc.n_paths = 50"))
    assert code == 3
    assert "Monte Carlo" in capsys.readouterr().err


def test_cli_kernel_series(tmp_path, capsys):
    code, out = _run(tmp_path, "kernel-series", SMALL + "series.order = 1\n")
    assert code == 0
    rows = list(csv.reader(open(out / "kernel_series.csv")))
    assert rows[0] == ["n", "t", "x1", "x2", "y1", "y2", "value"]
    assert len(rows) == 1 + 2 * 2
    code, _ = _run(tmp_path, "kernel-series",
                   SMALL + "series.order = 1\nseries.n_time = 4\ntol.quadrature = 1e-9\n")
    assert code == 3
    assert "quadrature" in capsys.readouterr().err
