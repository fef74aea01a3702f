import json
import os

import pytest

from app import EXIT_OK, EXIT_RECLAB_ERROR, main


@pytest.fixture
def kac_config(tmp_path):
    path = tmp_path / "kac.json"
    path.write_text(json.dumps({"experiment": "kac", "system": "doubling", "seed": 1, "center": 0.5,
                                "radius": 0.1, "n_starts": 2000, "sampler_burn_in": 100}))
    return str(path)


def test_validate_accepts_a_good_config(kac_config, capsys):
    assert main(["validate", "--config", kac_config]) == EXIT_OK
    assert "valid kac config" in capsys.readouterr().out


def test_validate_rejects_a_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"experiment": "kac", "system": "doubling"}))
    assert main(["validate", "--config", str(path)]) == EXIT_RECLAB_ERROR


def test_validate_rejects_bad_system_parameters(tmp_path):
    path = tmp_path / "lsv.json"
    path.write_text(json.dumps({"experiment": "kac", "system": "lsv", "seed": 1, "center": 0.5, "radius": 0.1,
                                "params": {"alpha": 2.0}}))
    assert main(["validate", "--config", str(path)]) == EXIT_RECLAB_ERROR


def test_list_systems(capsys):
    assert main(["list-systems"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert sorted(line.split()[0] for line in lines) == ["doubling", "lorenz1d", "lorenz2d", "lsv"]


def test_run_writes_into_out(kac_config, tmp_path):
    out = tmp_path / "results"
    assert main(["run", "--config", kac_config, "--out", str(out), "--workers", "1"]) == EXIT_OK
    assert sorted(os.listdir(out)) == ["kac.data.csv", "kac.plot.csv", "kac.summary.json"]


def test_run_rejects_zero_workers(kac_config, tmp_path):
    out = tmp_path / "results"
    assert main(["run", "--config", kac_config, "--out", str(out), "--workers", "0"]) == EXIT_RECLAB_ERROR
    assert not out.exists()


def test_run_with_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_RECLAB_ERROR
