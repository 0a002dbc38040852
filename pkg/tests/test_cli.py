import csv
import subprocess
import sys

import pytest

from jdmd import io
from jdmd.cli import EXIT_CONFIG, EXIT_OK, main

SMALL = ["--seed", "3"]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(
        "[experiment]\nnum_train_trajectories = 2\nnum_test_trajectories = 2\n"
        "num_validation_trajectories = 1\nlambda = 1e-4\n"
        "mu_grid = [0.0]\nn_grid = [1, 2]\nsample_grid = [1, 2]\nsweep_seeds = 1\n"
        "hist_tests = 3\nhist_edmd_n = 2\nhist_jdmd_n = 1\nhist_bins = 4\n"
    )
    return str(path)


def test_collect_train_eval_chain(tmp_path, small_config):
    data = tmp_path / "data"
    assert main(["collect", "--config", small_config, *SMALL, "--out", str(data)]) == EXIT_OK
    m = io.load_manifest(data)
    assert set(m.outputs) == {"train_dataset.json", "test_dataset.json", "reference.json"}
    assert m.seed == 3 and m.config["num_train_trajectories"] == 2

    models = tmp_path / "models"
    assert main(["train", "--config", small_config, *SMALL, "--out", str(models),
                 "--data", str(data / "train_dataset.json"), "--learners", "jdmd"]) == EXIT_OK
    assert io.load_model(models / "model_jdmd.json").n_y == 33
    assert len(io.load_manifest(models).inputs) == 2

    ev = tmp_path / "eval"
    assert main(["eval", "--config", small_config, *SMALL, "--out", str(ev),
                 "--models", str(models / "model_jdmd.json"),
                 "--tests", str(data / "test_dataset.json")]) == EXIT_OK
    with open(ev / "eval.csv") as f:
        rows = list(csv.DictReader(f))
    assert {r["learner"] for r in rows} == {"nominal", "jdmd"}
    assert len(rows) == 4
    report = io.load_report(ev / "eval_report.json")
    assert set(report) == {"nominal", "jdmd"}


def test_sweeps_and_histograms(tmp_path, small_config):
    out = tmp_path / "f"
    assert main(["sweep-friction", "--config", small_config, "--out", str(out)]) == EXIT_OK
    lines = (out / "friction.csv").read_text().splitlines()
    assert lines[0] == "mu,nominal,edmd,jdmd" and len(lines) == 2
    out = tmp_path / "s"
    assert main(["sweep-samples", "--config", small_config, "--out", str(out)]) == EXIT_OK
    assert (out / "samples.csv").read_text().startswith("learner,n,median,q05,q95,success_rate")
    out = tmp_path / "h"
    assert main(["histograms", "--config", small_config, "--out", str(out)]) == EXIT_OK
    rep = io.load_report(out / "histograms_report.json")
    for h in rep["histograms"].values():
        assert sum(h["edmd"]) == sum(h["jdmd"]) == 3


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("sample_rate_hz = 50\n")
    assert main(["collect", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "sample_rate_hz" in capsys.readouterr().err
    assert main(["collect", "--config", str(tmp_path / "none.toml"),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_corrupt_input_exit_1(tmp_path, small_config):
    bad = tmp_path / "d.json"
    bad.write_text("{}")
    assert main(["train", "--config", small_config, "--out", str(tmp_path / "o"),
                 "--data", str(bad)]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "jdmd", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for cmd in ("collect", "train", "eval", "sweep-friction", "sweep-samples", "histograms"):
        assert cmd in out
