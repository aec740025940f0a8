"""Tests for the bell-lab command line."""

import json
import math

import pytest
from click.testing import CliRunner

from bell_lab import __version__
from bell_lab.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main

from conftest import OPTIMAL_SINGLET

PHASE_MODEL = {"type": "unnikrishnan", "s": 0.5, "delta_phi": math.pi}


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, config_path, out_path, *args, env=None):
    return runner.invoke(main, ["run", str(config_path), "-o", str(out_path), "-q", *args], env=env)


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_chsh_singlet(runner, write_config, tmp_path):
    config = write_config({"experiment": "chsh", "model": PHASE_MODEL,
                           "settings": {"chsh": list(OPTIMAL_SINGLET)}})
    out = tmp_path / "chsh.json"
    result = run(runner, config, out)
    assert result.exit_code == EXIT_OK, result.output
    payload = json.loads(out.read_text())
    assert payload["schema"] == "bell-lab/chsh"
    assert payload["s_value"] == pytest.approx(-2.82842712475, abs=1e-10)
    assert payload["abs_s_value"] == pytest.approx(2 * math.sqrt(2), abs=1e-10)


def test_check_locality_phase_model(runner, write_config, tmp_path):
    config = write_config({"experiment": "check-locality", "model": PHASE_MODEL,
                           "grid": {"n_settings": 4, "n_hidden": 8}})
    out = tmp_path / "locality.json"
    result = run(runner, config, out)
    assert result.exit_code == EXIT_OK, result.output
    reports = {r["check_name"]: r for r in json.loads(out.read_text())["reports"]}
    assert reports["parameter-independence"]["verdict"] == "pass"
    assert reports["condition-c"]["verdict"] == "fail"
    assert reports["condition-c"]["max_residual"] == pytest.approx(0.25)
    assert reports["outcome-independence"]["verdict"] == "fail"


def test_check_locality_csv(runner, write_config, tmp_path):
    config = write_config({"experiment": "check-locality", "model": {"type": "deterministic-sign"},
                           "grid": {"n_settings": 4, "n_hidden": 8}})
    out = tmp_path / "locality.csv"
    result = run(runner, config, out, "-f", "csv")
    assert result.exit_code == EXIT_OK, result.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# schema=bell-lab/check-locality")
    assert lines[1] == "check_name,verdict,max_residual,tolerance"
    assert [line.split(",")[1] for line in lines[2:]] == ["pass", "pass", "pass"]


def test_missing_model_is_a_validation_error(runner, write_config, tmp_path):
    config = write_config({"experiment": "chsh", "settings": {"chsh": list(OPTIMAL_SINGLET)}})
    result = run(runner, config, tmp_path / "never.json")
    assert result.exit_code == EXIT_VALIDATION
    assert not (tmp_path / "never.json").exists()


def test_unreadable_config(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("[1, 2", encoding="utf-8")
    assert run(runner, path, tmp_path / "out.json").exit_code == EXIT_VALIDATION


def test_signaling_behavior_is_a_runtime_error(runner, write_config, tmp_path):
    # A's marginal follows B's setting.
    cells = [[[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]] * 2
    config = write_config({"experiment": "polytope-membership",
                           "behavior": {"settings_a": [0.0, 1.0], "settings_b": [0.0, 1.0], "cells": cells}})
    result = run(runner, config, tmp_path / "membership.json")
    assert result.exit_code == EXIT_RUNTIME


def test_pr_box_membership(runner, write_config, tmp_path):
    half = [0.5, 0.0, 0.0, 0.5]
    anti = [0.0, 0.5, 0.5, 0.0]
    config = write_config({"experiment": "polytope-membership",
                           "behavior": {"settings_a": [0.0, 1.0], "settings_b": [0.0, 1.0],
                                        "cells": [[half, half], [half, anti]]}})
    out = tmp_path / "membership.json"
    assert run(runner, config, out).exit_code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["status"] == "nonlocal"
    assert payload["violated_inequality"]["value"] == pytest.approx(4.0)


class TestDeterminism:
    @pytest.fixture
    def monte_carlo_config(self, write_config):
        return write_config({
            "experiment": "correlate",
            "model": {"type": "stochastic-cosine", "visibility": 0.8},
            "settings": {"a": [0.0, 1.0], "b": [0.5, 2.0]},
            "integration": {"method": "monte-carlo", "n": 3000, "seed": 11, "chunk_size": 256},
        })

    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_worker_count_does_not_change_bytes(self, runner, monte_carlo_config, tmp_path, fmt):
        serial, parallel = tmp_path / f"w1.{fmt}", tmp_path / f"w4.{fmt}"
        assert run(runner, monte_carlo_config, serial, "-f", fmt, "--workers", "1").exit_code == EXIT_OK
        assert run(runner, monte_carlo_config, parallel, "-f", fmt, "--workers", "4").exit_code == EXIT_OK
        assert serial.read_bytes() == parallel.read_bytes()

    def test_seed_flag_beats_environment(self, runner, monte_carlo_config, tmp_path):
        from_env = tmp_path / "env.json"
        from_flag = tmp_path / "flag.json"
        from_config = tmp_path / "config.json"
        assert run(runner, monte_carlo_config, from_env, env={"BELL_LAB_SEED": "5"}).exit_code == EXIT_OK
        assert run(runner, monte_carlo_config, from_flag, "--seed", "5",
                   env={"BELL_LAB_SEED": "6"}).exit_code == EXIT_OK
        assert run(runner, monte_carlo_config, from_config).exit_code == EXIT_OK
        assert from_env.read_bytes() == from_flag.read_bytes()
        assert from_env.read_bytes() != from_config.read_bytes()
        assert json.loads(from_env.read_text())["integration"]["seed"] == 5


def test_hbt_csv(runner, write_config, tmp_path):
    config = write_config({"experiment": "hbt", "hbt": {"n_events": 4000, "seed": 2, "chunk_size": 1000}})
    out = tmp_path / "hbt.csv"
    result = run(runner, config, out, "-f", "csv")
    assert result.exit_code == EXIT_OK, result.output
    rows = dict(line.split(",", 1) for line in out.read_text().splitlines()[2:])
    assert rows["fixed_h_covariance"] == "0"
    assert rows["all_local"] == "true"
    assert float(rows["condition_c_residual"]) == 0.0
