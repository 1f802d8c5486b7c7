"""CLI: configs, sweeps, validation driver, exit codes, determinism."""

import json
import math

import numpy as np
import pytest

from hyperpam.cli import main

BASE_CONFIG = """\
[model]
kind = constant
c = 1.0

[run]
dim = 3
step = 1e-2
n_paths = 64
seed = 4242
estimators = fk

[sweep]
beta = 0.5
t = 1, 2, 3, 4
"""


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_missing_config_exits_2(tmp_path, capsys):
    rc = main(["phase-sweep", "--config", str(tmp_path / "nope.cfg"),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_config_error_reports_location(tmp_path, capsys):
    bad = BASE_CONFIG.replace("beta = 0.5", "beta = fast")
    rc = main(["phase-sweep", "--config", _write(tmp_path, bad),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "beta" in err and ":" in err


def test_missing_seed_rejected(tmp_path, capsys):
    bad = BASE_CONFIG.replace("seed = 4242\n", "")
    rc = main(["phase-sweep", "--config", _write(tmp_path, bad),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_estimator_rejected(tmp_path, capsys):
    bad = BASE_CONFIG.replace("estimators = fk", "estimators = mc3000")
    rc = main(["phase-sweep", "--config", _write(tmp_path, bad),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "mc3000" in capsys.readouterr().err


def test_beta_zero_sweep_rows_are_zero(tmp_path):
    cfg = BASE_CONFIG.replace("beta = 0.5", "beta = 0")
    out = tmp_path / "out"
    assert main(["phase-sweep", "--config", _write(tmp_path, cfg),
                 "--out", str(out)]) == 0
    rows = json.loads((out / "rows.json").read_text())["rows"]
    assert len(rows) == 4
    assert all(r["log_m2"] == 0.0 and r["stderr_log"] == 0.0 for r in rows)


def test_constant_sweep_reproduces_rate(tmp_path):
    out = tmp_path / "out"
    assert main(["phase-sweep", "--config", _write(tmp_path, BASE_CONFIG),
                 "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())["summaries"]
    fit = summary["fk:beta=0.5"]
    assert fit["classification"] == "linear"
    assert fit["rate_or_exponent"] == pytest.approx(0.25, rel=0.01)
    # header comment carries the config hash and seed
    first = (out / "rows.csv").read_text().splitlines()[0]
    assert first.startswith("#") and "config_hash=" in first and "seed=4242" in first


def test_sweep_reruns_byte_identical(tmp_path):
    cfg = _write(tmp_path, BASE_CONFIG)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["phase-sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["phase-sweep", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "rows.csv").read_bytes() == (out2 / "rows.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_sweep_worker_pool_matches_serial(tmp_path):
    cfg = _write(tmp_path, BASE_CONFIG)
    out1, out2 = tmp_path / "serial", tmp_path / "pool"
    assert main(["phase-sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["phase-sweep", "--config", cfg, "--workers", "2",
                 "--out", str(out2)]) == 0
    assert (out1 / "rows.csv").read_bytes() == (out2 / "rows.csv").read_bytes()


def test_power_regime_sweep_classification(tmp_path):
    cfg = """\
[model]
kind = phi-alpha
alpha = 0.5

[run]
dim = 3
step = 5e-3
n_paths = 256
seed = 777
estimators = jensen

[sweep]
beta = 0.3
t = 4, 8, 16, 32
"""
    out = tmp_path / "out"
    assert main(["phase-sweep", "--config", _write(tmp_path, cfg),
                 "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())["summaries"]
    fit = summary["jensen:beta=0.3"]
    assert fit["hypothesis"] == "power-t^{1-alpha}"
    assert fit["classification"] == "power"
    assert fit["r2_power"] > fit["r2_linear"]


def test_validate_suite_passes_and_self_test(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    rc = main(["validate", "--suite", "covariance", "--out", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["all_passed"]
    names = {c["name"] for c in report["checks"]}
    assert {"decay-limit", "positive-type", "quadrature-consistency"} <= names
    capsys.readouterr()
    # corrupted tolerance: every limit scaled to zero must turn the run red
    rc = main(["validate", "--suite", "covariance", "--tolerance-scale", "0.0"])
    assert rc == 1


def test_lambda_requires_integrable_decay(tmp_path, capsys):
    cfg = BASE_CONFIG  # constant kind: no decay
    rc = main(["lambda", "--config", _write(tmp_path, cfg),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "alpha > 1" in capsys.readouterr().err


def test_lambda_run_writes_threshold(tmp_path):
    cfg = """\
[model]
kind = truncated-power
alpha = 2.0
C = 1.0

[run]
dim = 3
step = 5e-3
seed = 902

[lambda]
t_max = 50
separations = 0, 5
n_paths = 96
"""
    out = tmp_path / "out"
    assert main(["lambda", "--config", _write(tmp_path, cfg),
                 "--out", str(out)]) == 0
    result = json.loads((out / "lambda.json").read_text())
    assert result["lambda_hat"] > 0
    assert result["beta0_hat"] == pytest.approx(result["lambda_hat"] ** -0.5)
    assert len(result["pairs"]) == 2
    assert all(np.isfinite(p["tail_correction"]) for p in result["pairs"])


def test_sample_path_dump(tmp_path):
    out = tmp_path / "paths.csv"
    rc = main(["sample-path", "--t", "0.5", "--n-paths", "2", "--step", "1e-2",
               "--seed", "5", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "path_id,t,z1,z2,z3,z4"
    assert len(lines) > 4


def test_eigenvalue_subcommand(capsys):
    assert main(["eigenvalue", "--r", "1.0", "--mode", "euclidean"]) == 0
    out = capsys.readouterr().out
    val = float(out.strip().split("=")[-1])
    assert val == pytest.approx(math.pi**2, rel=1e-6)
