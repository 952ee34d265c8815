import json
import subprocess
import sys

import numpy as np
import pytest

from kpde.cli import main
from kpde.config import config_from_dict, preset_config
from kpde.experiment import run_experiment
from kpde.output import read_csv

ZERO_DATA = {
    "problem": {
        "potential": {"kind": "bounded", "expression": "cos(pi*x/R)"},
        "force": {"kind": "zero"},
        "initial": {"kind": "zero"},
    },
    "discretization": {"R": 8.0, "n": 256, "T": 0.2, "dt": 0.02},
    "truncation": {"P": 1, "K": 2},
    "regularization": {"scale_law": "linear"},
    "schedule": {"values": [1.0, 0.75, 0.5]},
    "verification": {
        "checks": ["moderate", "unique", "consistent", "mc"],
        "alternate_mollifier": {"scale_law": "linear", "perturbation_power": 8.0},
        "monte_carlo": {"n_samples": 50, "probe_times": [0.2], "probe_points": [[0.0]]},
    },
}

SMALL_DELTA = {"preset": "example-sec4", "truncation": {"P": 1, "K": 2},
              "problem": {"force": {"K": 2}, "initial": {"fluctuations": ["0.2*exp(-x**2)"]}},
              "discretization": {"n": 256, "dt": 0.05}, "schedule": {"j_min": 1, "j_max": 3}}


def _cfg(raw):
    return config_from_dict(raw, preset=raw.get("preset"))


def _dump(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def test_zero_data_all_zero_and_trivially_pass(tmp_path):
    rep = run_experiment(_cfg(ZERO_DATA), out_dir=tmp_path)
    assert rep.complete and rep.exit_code == 0
    assert rep.verdicts == {c: "PASS" for c in ("moderate", "unique", "consistent", "mc")}
    num = rep.numeric
    assert num["deterministic"]["sup_l2"] == 0.0
    assert all(m["n_coefficients"] == 0 for m in num["chaos"]["members"])
    assert num["checks"]["moderate"]["norms"] == [0.0] * 3
    assert num["checks"]["consistent"]["errors"] == [0.0] * 3
    _, rows = read_csv(tmp_path / "mean_variance_eps01.csv")
    assert all(float(r[1]) == 0 and float(r[2]) == 0 for r in rows)
    _, rows = read_csv(tmp_path / "trajectory.csv")
    assert all(float(r[2]) == 0 for r in rows)


def test_delta_preset_report_structure(tmp_path):
    rep = run_experiment(preset_config("example-sec4"), out_dir=tmp_path)
    assert rep.exit_code == 0 and rep.verdicts == {"moderate": "PASS"}
    fit = rep.numeric["checks"]["moderate"]["fit"]
    assert fit["N"] <= 1.0 and fit["residual"] < 0.25
    for j in range(5):
        header, rows = read_csv(tmp_path / f"coefficients_eps{j + 1:02d}.csv")
        assert header == ["p", "gamma", "X_norm", "weight_p", "contribution"]
        gammas = {r[1] for r in rows}
        assert len(gammas) == 6
        assert all(sum(int(v) for v in g.strip("[]").split()) <= 1 for g in gammas)
    assert rep.numeric["deterministic"]["within_apriori_bound"]


def test_consistency_preset_trace(tmp_path):
    rep = run_experiment(preset_config("consistency-cos"), out_dir=tmp_path)
    assert rep.exit_code == 0
    header, rows = read_csv(tmp_path / "decay_consistent.csv")
    assert len(rows) == 6
    err = [float(r[header.index("error")]) for r in rows]
    assert all(b < a for a, b in zip(err, err[1:]))


def test_report_json_round_trip(tmp_path):
    rep = run_experiment(_cfg(SMALL_DELTA), out_dir=tmp_path)
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk == json.loads(json.dumps(rep.to_dict()))
    files = {m["file"] for m in on_disk["manifest"]}
    assert {"config.json", "regularize.csv", "norms.csv", "decay_moderate.csv"} <= files
    assert "T" in on_disk["metadata"]["started"]  # ISO-8601


def test_reproducible_numeric_block(tmp_path):
    a = run_experiment(_cfg(SMALL_DELTA), out_dir=tmp_path / "a", threads=1)
    b = run_experiment(_cfg(SMALL_DELTA), out_dir=tmp_path / "b", threads=3)
    ja = json.loads((tmp_path / "a" / "report.json").read_text())
    jb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert json.dumps(ja["numeric"]) == json.dumps(jb["numeric"])
    assert ja["config_hash"] == jb["config_hash"]
    for name in ("coefficients_eps03.csv", "decay_moderate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stage_failure_gives_partial_report(tmp_path, monkeypatch):
    import kpde.experiment as ex

    def boom(*a):
        raise FloatingPointError("overflow in solve")

    monkeypatch.setattr(ex, "stage_chaos", boom)
    rep = run_experiment(_cfg(SMALL_DELTA), out_dir=tmp_path)
    assert not rep.complete and rep.exit_code == 3
    assert "overflow" in rep.error
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["complete"] is False and "regularization" in saved["numeric"]


# -- CLI exit codes --------------------------------------------------------------

def test_cli_pass(tmp_path, capsys):
    assert main(["run", "--config", _dump(tmp_path, SMALL_DELTA), "--out", str(tmp_path / "o")]) == 0
    assert "moderate: PASS" in capsys.readouterr().out


def test_cli_check_failure(tmp_path, capsys):
    raw = dict(SMALL_DELTA, verification={"residual_threshold": 1e-12})
    assert main(["verify", "moderate", "--config", _dump(tmp_path, raw), "--out", str(tmp_path / "o")]) == 1
    assert "moderate: FAIL" in capsys.readouterr().out


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--config", _dump(tmp_path, {"preset": "example-sec4", "potental": {}})]) == 2
    assert "potental" in capsys.readouterr().err
    assert main(["run"]) == 2
    assert main(["verify", "nonsense", "--preset", "example-sec4"]) == 2
    assert main(["run", "--preset", "example-sec4", "--threads", "0"]) == 2


def test_cli_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["regularize", "--config", _dump(tmp_path, SMALL_DELTA), "--out", str(blocker / "o")]) == 3


def test_cli_subcommands_write_their_artifacts(tmp_path):
    cfg = _dump(tmp_path, SMALL_DELTA)
    for cmd, name in (("regularize", "regularize.csv"), ("solve-det", "trajectory.csv"),
                      ("solve-chaos", "coefficients_eps01.csv")):
        out = tmp_path / cmd
        assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
        assert (out / name).exists() and (out / "report.json").exists()


def test_cli_seed_override(tmp_path):
    out = tmp_path / "o"
    main(["solve-det", "--config", _dump(tmp_path, SMALL_DELTA), "--seed", "17", "--out", str(out)])
    assert json.loads((out / "report.json").read_text())["config"]["verification"]["seed"] == 17


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("KPDE_THREADS", "2")
    rep = run_experiment(_cfg(SMALL_DELTA), stages=("regularize",), out_dir=tmp_path)
    assert rep.metadata["threads"] == 2


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "kpde.cli", "regularize", "--config", _dump(tmp_path, SMALL_DELTA),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
