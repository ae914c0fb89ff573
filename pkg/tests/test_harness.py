"""Harness orchestration, emission, determinism, CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from momentflow import ensembles as ens
from momentflow.harness import (
    CheckResult,
    ExperimentConfig,
    ExperimentReport,
    default_scales,
    emit_report,
    run_experiment,
    validate_scale_chain,
)


def test_default_scales_proportions():
    sc = default_scales(N=40, n=2, t=0.5, delta=0.2)
    assert sc["K"] == pytest.approx(40**0.8 * 0.5)
    assert sc["ell1"] == pytest.approx(sc["K"] ** 0.75)
    assert sc["T1"] == pytest.approx(np.sqrt(sc["K"]) / 40)
    assert sc["ell2"] == pytest.approx(np.sqrt(sc["K"] * 40 * sc["T2"]))


def test_scale_chain_validation():
    assert validate_scale_chain(1e-3, 0.1, 1.0, 100, 0.2)
    with pytest.raises(ValueError, match="scale chain"):
        validate_scale_chain(1e-3, 0.5, 1.0, 100, 1.5)


def test_operator_suite_small():
    cfg = ExperimentConfig(kind="operator-suite", seed=1, N=6, n=4,
                           haar_samples=30_000, l1_trials=4)
    rep = run_experiment(cfg)
    names = [c.name for c in rep.checks]
    assert len(names) == len(set(names))  # every check appears exactly once
    assert rep.all_passed
    assert "haar-crosscheck" in rep.tables


def test_fsp_experiment_passes():
    rep = run_experiment(ExperimentConfig(kind="fsp", seed=2))
    assert rep.all_passed


def test_assumptions_experiment_passes():
    rep = run_experiment(ExperimentConfig(kind="assumptions", seed=2, N=120))
    assert rep.all_passed
    assert "classical-locations" in rep.tables


def test_generator_validate_experiment_passes():
    rep = run_experiment(ExperimentConfig(kind="generator-validate", seed=2,
                                          paths=20_000))
    assert rep.all_passed


def test_mixing_experiment_passes():
    rep = run_experiment(ExperimentConfig(kind="mixing", seed=2, ells=(8, 16)))
    assert rep.all_passed
    assert "poincare" in rep.tables and "ultracontractivity" in rep.tables


def test_ansatz_compare_passes():
    rep = run_experiment(ExperimentConfig(kind="ansatz-compare", seed=2,
                                          mc_trials=120, mc_N=32))
    assert rep.all_passed


def test_joint_normality_small_goe():
    cfg = ExperimentConfig(kind="joint-normality", seed=4, trials=400,
                           ensemble=ens.EnsembleSpec(kind="goe", N=80, seed=4))
    rep = run_experiment(cfg)
    assert rep.all_passed


def test_emit_report_json_and_csv(tmp_path):
    rep = ExperimentReport(
        config={"kind": "demo", "seed": 1},
        checks=[CheckResult("alpha", 1.0, 1.0, 0.1, True)],
        tables={"curve": (["s", "value"], [(0.0, 1.0), (1.0, 0.5)])},
    )
    paths = emit_report(rep, fmt="csv", out_dir=tmp_path / "csv")
    assert (tmp_path / "csv" / "summary.json").exists()
    assert (tmp_path / "csv" / "curve.csv").exists()
    lines = open(tmp_path / "csv" / "curve.csv").read().strip().splitlines()
    assert lines[0] == "s,value"
    summary = json.load(open(paths[0]))
    assert summary["checks"][0]["name"] == "alpha"
    assert summary["checks"][0]["pass"] is True
    jpaths = emit_report(rep, fmt="json", out_dir=tmp_path / "json")
    summary2 = json.load(open(jpaths[0]))
    assert summary2["tables"]["curve"]["rows"] == [[0.0, 1.0], [1.0, 0.5]]


def test_emit_report_empty_checks(tmp_path):
    rep = ExperimentReport(config={"kind": "demo"}, checks=[], tables={})
    (path,) = emit_report(rep, fmt="json", out_dir=tmp_path)
    assert json.load(open(path))["checks"] == []


def test_rerun_byte_identical(tmp_path):
    out = []
    for name in ("a", "b"):
        cfg = ExperimentConfig(kind="fsp", seed=5, record_runtime=False)
        emit_report(run_experiment(cfg), fmt="json", out_dir=tmp_path / name)
        out.append(open(tmp_path / name / "summary.json", "rb").read())
    assert out[0] == out[1]


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig(
        kind="joint-normality", seed=9, trials=50,
        ensemble=ens.EnsembleSpec(kind="erdos-renyi", N=60, p=6, seed=9),
    )
    path = tmp_path / "cfg.json"
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh)
    again = ExperimentConfig.from_json(path)
    assert again.kind == cfg.kind
    assert again.trials == 50
    assert again.ensemble == cfg.ensemble


def test_cli_end_to_end(tmp_path):
    out_dir = tmp_path / "run"
    proc = subprocess.run(
        [sys.executable, "-m", "momentflow", "fsp", "--seed", "3",
         "--out", str(out_dir), "--format", "csv"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "PASS far-field" in proc.stdout
    assert (out_dir / "summary.json").exists()
    assert (out_dir / "profile.csv").exists()


def test_cli_help_documents_columns():
    proc = subprocess.run([sys.executable, "-m", "momentflow", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "CSV columns" in proc.stdout
