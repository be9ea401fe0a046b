import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bmc_kdetect import cli, io

SCENARIO = {"id": "cli", "ensemble": "assortative", "K": 3, "n": 150, "alpha": "const",
            "estimators": ["alg2", "megh"], "replications": 3, "root_seed": 5}


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(SCENARIO))
    return p


def test_sample_estimate_metrics(tmp_path, config, capsys):
    traj, lab, est = tmp_path / "t.bin", tmp_path / "truth.txt", tmp_path / "est.txt"
    assert cli.main(["sample", "--config", str(config), "--out", str(traj),
                     "--labels-out", str(lab)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 150 and info["K"] == 3
    assert cli.main(["estimate", "--traj", str(traj), "--estimator", "alg2",
                     "--a", "0.9", "--b", "0.1", "--c", "0.75", "--labels-out", str(est)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["k_hat"] == 3 and out["ell"] == io.read_trajectory(traj).ell
    assert cli.main(["metrics", "--truth", str(lab), "--est", str(est)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["relative_accuracy"] == 0.0
    assert report["misclassified_count"] < 15


def test_experiment_writes_csv(tmp_path, config):
    out, piv = tmp_path / "r.csv", tmp_path / "p.csv"
    assert cli.main(["experiment", "--config", str(config), "--out", str(out),
                     "--pivot", str(piv)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 3 * 2
    assert piv.read_text().startswith("scenario,alg2_mean")


def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ensemble": "nope"}))
    assert cli.main(["experiment", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert cli.main(["estimate", "--traj", str(tmp_path / "missing.bin")]) == 2
    assert cli.main(["estimate", "--traj", str(bad), "--a", "2.0"]) == 2


def test_exit_code_numerical(tmp_path, monkeypatch):
    from bmc_kdetect.exceptions import NoConvergence
    t = tmp_path / "t.txt"
    t.write_text("0\n1\n0\n")

    def boom(*a, **k):
        raise NoConvergence("stalled")
    monkeypatch.setattr(cli, "run_estimator", boom)
    assert cli.main(["estimate", "--traj", str(t)]) == 3


def test_experiment_thread_determinism(tmp_path, config):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"r{threads}.csv"
        env = dict(os.environ, BMC_THREADS=threads)
        subprocess.run([sys.executable, "-m", "bmc_kdetect.cli", "experiment", "--config", str(config),
                        "--out", str(out)], check=True, env=env)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
