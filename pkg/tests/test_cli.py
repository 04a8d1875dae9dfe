"""Command line interface: file formats, exit codes, and end-to-end flows."""

import json
import subprocess
import sys

import numpy as np
import pytest

from stablepem import cli
from stablepem.lmi import SdpError
from stablepem.lti import ArmaxModel, Polynomial, simulate_armax


def _write_csv(path, u, y):
    lines = ["t,u,y"]
    for t, (uv, yv) in enumerate(zip(u, y)):
        lines.append(f"{t},{float(uv)!r},{float(yv)!r}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def damped_csv(tmp_path_factory):
    model = ArmaxModel(
        a=Polynomial.from_roots([0.5, -0.3]),
        b=Polynomial([1.0, 0.4]),
        c=Polynomial([1.0, 0.2], monic=True),
        k_gain=1.0,
    )
    rng = np.random.default_rng(0)
    u = rng.standard_normal(150)
    y = simulate_armax(model, u, 0.3 * rng.standard_normal(150))
    path = tmp_path_factory.mktemp("data") / "damped.csv"
    _write_csv(path, u, y)
    return path


@pytest.fixture(scope="module")
def unstable_files(tmp_path_factory, unstable_case):
    root = tmp_path_factory.mktemp("unstable")
    csv_path = root / "id.csv"
    _write_csv(csv_path, unstable_case.data_id.u, unstable_case.data_id.y)
    res = unstable_case.result
    doc = {
        "schema": "stablepem-model-v1",
        "p": res.predictor.p,
        "f": [float(v) for v in res.predictor.f],
        "g": [float(v) for v in res.predictor.g],
        "spectral_radius": res.forward.spectral_radius,
        "stable": False,
        "hyperparameters": {
            "scale": res.hyperparameters.scale,
            "decay": res.hyperparameters.decay,
            "noise_variance": res.hyperparameters.noise_variance,
        },
    }
    model_path = root / "model.json"
    model_path.write_text(json.dumps(doc))
    return csv_path, model_path


def test_identify_writes_model_doc(damped_csv, tmp_path, capsys):
    out = tmp_path / "model.json"
    rc = cli.main(
        ["identify", "--in", str(damped_csv), "--p", "6", "--out", str(out)]
    )
    assert rc == 0
    assert "spectral radius" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["schema"] == "stablepem-model-v1"
    assert doc["p"] == 6 and len(doc["f"]) == 6 and len(doc["g"]) == 6
    assert doc["stable"] is True
    assert 0.0 < doc["spectral_radius"] < 1.0
    assert set(doc["hyperparameters"]) == {"scale", "decay", "noise_variance"}


def test_identify_stdout_output(damped_csv, capsys):
    rc = cli.main(["identify", "--in", str(damped_csv), "--p", "4"])
    assert rc == 0
    out = capsys.readouterr().out
    doc = json.loads(out[: out.rindex("}") + 1])
    assert doc["schema"] == "stablepem-model-v1" and doc["p"] == 4


def test_stabilize_lmi_round_trip(unstable_files, tmp_path, capsys):
    _, model_path = unstable_files
    out = tmp_path / "stable.json"
    rc = cli.main(
        ["stabilize", "--model", str(model_path), "--method", "lmi", "--out", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["stabilized_by"] == "lmi"
    assert doc["stable"] is True and doc["spectral_radius"] < 1.0
    src = json.loads(model_path.read_text())
    assert doc["g"] == src["g"]
    assert "spectral radius" in capsys.readouterr().out


def test_stabilize_already_stable_copies(damped_csv, tmp_path, capsys):
    model = tmp_path / "model.json"
    rc = cli.main(
        ["identify", "--in", str(damped_csv), "--p", "5", "--out", str(model)]
    )
    assert rc == 0
    capsys.readouterr()
    out = tmp_path / "copy.json"
    rc = cli.main(
        ["stabilize", "--model", str(model), "--method", "lmi", "--out", str(out)]
    )
    assert rc == 0
    assert "already stable" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["stabilized_by"] is None
    assert doc["f"] == json.loads(model.read_text())["f"]


def test_stabilize_ml_pf_requires_data(unstable_files, capsys):
    _, model_path = unstable_files
    rc = cli.main(["stabilize", "--model", str(model_path), "--method", "ml-pf"])
    assert rc == 1
    assert "needs --data" in capsys.readouterr().err


def test_stabilize_ml_pf_end_to_end(unstable_files, tmp_path, capsys):
    csv_path, model_path = unstable_files
    out = tmp_path / "mlpf.json"
    rc = cli.main(
        [
            "stabilize", "--model", str(model_path), "--method", "ml-pf",
            "--data", str(csv_path), "--out", str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["stabilized_by"] == "ml-pf"
    assert doc["spectral_radius"] < 1.0
    capsys.readouterr()


def test_stabilize_mcmc_mean_writes_forward_doc(unstable_files, tmp_path, capsys):
    csv_path, model_path = unstable_files
    out = tmp_path / "mean.json"
    rc = cli.main(
        [
            "stabilize", "--model", str(model_path), "--method", "mcmc-mean",
            "--data", str(csv_path), "--out", str(out), "--seed", "4",
            "--n-hyper", "250", "--burn-in", "250", "--n-stable", "250",
            "--n-components", "30", "--kappa-draws", "250",
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "stablepem-forward-v1"
    assert doc["stabilized_by"] == "mcmc-mean"
    assert doc["stable"] is True and doc["spectral_radius"] < 1.0
    assert len(doc["p_ir"]) == 200 and len(doc["h_ir"]) == 200
    capsys.readouterr()


def test_bad_csv_header_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,in,out\n0,1,2\n1,3,4\n")
    rc = cli.main(["identify", "--in", str(bad), "--p", "2"])
    assert rc == 1
    assert "expected header 't,u,y'" in capsys.readouterr().err


def test_bad_csv_cell_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u,y\n0,1.0,2.0\n1,oops,3.0\n")
    rc = cli.main(["identify", "--in", str(bad), "--p", "2"])
    assert rc == 1
    assert f"{bad}:3:" in capsys.readouterr().err


def test_csv_time_column_must_increase(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u,y\n0,1.0,2.0\n0,2.0,3.0\n")
    rc = cli.main(["identify", "--in", str(bad), "--p", "2"])
    assert rc == 1
    assert "time column must increase" in capsys.readouterr().err


def test_bad_model_schema_rejected(tmp_path, capsys):
    doc = tmp_path / "model.json"
    doc.write_text(json.dumps({"schema": "other", "f": [0.5], "g": [1.0]}))
    rc = cli.main(["stabilize", "--model", str(doc), "--method", "lmi"])
    assert rc == 1
    assert "expected schema" in capsys.readouterr().err


def test_benchmark_config_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "bench.toml"
    cfg.write_text(
        '[benchmark]\nruns = 1\nseed = 99\nmethods = ["lmi"]\nmake_plots = false\n'
    )
    out = tmp_path / "results"
    rc = cli.main(
        [
            "benchmark", "--config", str(cfg), "--runs", "2", "--seed", "2",
            "--out", str(out),
        ]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "runs 2  unstable 1 (50.0%)" in text
    assert "lmi: ok 1 failed 0" in text
    report = json.loads((out / "report.json").read_text())
    assert report["runs"] == 2 and report["config"]["seed"] == 2
    assert not (out / "impulse_errors.svg").exists()
    assert (out / "records.json").exists()


def test_unknown_toml_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bench.toml"
    cfg.write_text("[benchmark]\nruns = 1\nboost = true\n")
    rc = cli.main(["benchmark", "--config", str(cfg)])
    assert rc == 1
    assert "unknown config keys: ['boost']" in capsys.readouterr().err


def test_report_rebuild_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "bench.toml"
    cfg.write_text('[benchmark]\nruns = 2\nseed = 2\nmethods = ["lmi"]\n')
    first = tmp_path / "first"
    rc = cli.main(["benchmark", "--config", str(cfg), "--out", str(first)])
    assert rc == 0
    second = tmp_path / "second"
    rc = cli.main(
        ["report", "--records", str(first / "records.json"), "--out", str(second)]
    )
    assert rc == 0
    capsys.readouterr()
    for name in ("report.json", "summary.csv", "unstable_runs.csv",
                 "impulse_errors.svg", "dominant_poles.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_numerical_failure_maps_to_exit_2(unstable_files, monkeypatch, capsys):
    _, model_path = unstable_files

    def boom(f):
        raise SdpError("interior point iteration diverged")

    monkeypatch.setattr(cli, "project_stable", boom)
    rc = cli.main(["stabilize", "--model", str(model_path), "--method", "lmi"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "numerical failure: SdpError" in err


def test_no_subcommand_prints_help(capsys):
    rc = cli.main([])
    assert rc == 1
    assert "identify" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    rc = cli.main(["identify", "--wat"])
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "stablepem.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "identify" in proc.stdout
