"""Tests for the classical intensity-interferometry simulation."""

import csv
import math

import numpy as np
import pytest

import bell_lab.hbt as hbt
from bell_lab.errors import ValidationError
from bell_lab.hbt import (
    HBT_EVENT_COLUMNS,
    HbtConfig,
    hbt_events,
    hbt_intensity,
    hbt_joint_model,
    hbt_locality_audit,
    hbt_outcome,
    hbt_run,
    sample_covariance,
    write_hbt_events,
)
from bell_lab.polytope import chsh_inequalities


class TestIntensity:
    @pytest.mark.parametrize("theta, alpha, expected", [
        (0.0, 0.0, 2.0),
        (math.pi, 0.0, 0.0),
        (math.pi / 6, math.pi / 6, 1.5),
    ])
    def test_values(self, theta, alpha, expected):
        assert hbt_intensity(theta, alpha) == pytest.approx(expected, abs=1e-15)

    def test_range(self):
        theta = np.linspace(0.0, 2 * math.pi, 101)
        values = hbt_intensity(theta, 0.3)
        assert values.min() >= 0.0 and values.max() <= 2.0

    def test_threshold_outcomes(self):
        np.testing.assert_array_equal(hbt_outcome([0.0, math.pi], 0.0), [1, -1])


class TestConfig:
    def test_n_events_positive(self):
        with pytest.raises(ValidationError):
            HbtConfig(n_events=0)

    def test_round_trip(self):
        config = HbtConfig(alpha1=0.1, alpha2=0.4, n_events=10, seed=3, settings_a=[0.0, 1.0])
        assert HbtConfig.from_dict(config.to_dict()) == config

    def test_unknown_keys_ignored(self):
        assert HbtConfig.from_dict({"n_events": 5, "color": "blue"}).n_events == 5


class TestRun:
    @pytest.mark.parametrize("delta", [0.0, math.pi / 4, math.pi / 2, math.pi])
    def test_ensemble_covariance_matches_analytic(self, delta):
        report = hbt_run(HbtConfig(alpha1=delta, alpha2=0.0, n_events=10 ** 5, seed=17))
        expected = 0.5 * math.cos(delta)
        assert report.analytic_covariance == pytest.approx(expected)
        assert abs(report.ensemble_covariance - expected) <= 5 * report.ensemble_stderr + 1e-12

    def test_fixed_phase_covariance_is_exactly_zero(self):
        report = hbt_run(HbtConfig(alpha1=0.3, alpha2=1.1, n_events=1000, seed=1))
        assert report.fixed_h_covariance == 0.0
        assert report.fixed_h_outcome_residual == 0.0
        assert report.ensemble_covariance != 0.0

    def test_fixed_phase_covariance_detects_shared_noise(self, monkeypatch):
        def noisy(theta, alpha):
            theta = np.asarray(theta, dtype=float)
            return 1.0 + np.cos(theta + alpha) + 0.1 * np.sin(np.arange(theta.shape[-1] if theta.ndim else 1))

        monkeypatch.setattr(hbt, "hbt_intensity", noisy)
        report = hbt_run(HbtConfig(alpha1=0.3, alpha2=1.1, n_events=200, seed=1))
        assert report.fixed_h_covariance > 1e-4

    def test_binary_behavior_is_local(self):
        report = hbt_run(HbtConfig(n_events=20000, seed=5, settings_a=[0.0, 0.7, 2.0], settings_b=[0.3, 1.9]))
        assert report.binary_behavior.shape == (3, 2)
        for i, i2 in [(0, 1), (0, 2), (1, 2)]:
            sub = report.binary_behavior.restrict([i, i2], [0, 1])
            assert chsh_inequalities(sub).max() <= 2.0 + 1e-9
        assert report.chsh_of_binary.abs_s <= 2.0 + 1e-9

    def test_same_results_for_any_worker_count(self):
        base = dict(alpha1=0.2, alpha2=0.9, n_events=30000, seed=8, chunk_size=4000)
        serial = hbt_run(HbtConfig(workers=1, **base))
        parallel = hbt_run(HbtConfig(workers=3, **base))
        assert serial.ensemble_covariance == parallel.ensemble_covariance
        np.testing.assert_array_equal(serial.binary_behavior.table, parallel.binary_behavior.table)
        assert serial.to_dict() == parallel.to_dict()

    def test_report_dict(self):
        data = hbt_run(HbtConfig(n_events=100, seed=2)).to_dict()
        assert "workers" not in data["config"]
        assert set(data["binary_behavior"]) == {"settings_a", "settings_b", "cells"}


class TestAudit:
    def test_canonical_settings(self):
        audit = hbt_locality_audit(HbtConfig(n_events=20000, seed=3))
        assert len(audit.verdicts) == 1
        assert audit.all_local
        assert audit.condition_c.max_residual == 0.0
        assert audit.condition_c.passed

    def test_every_sub_behavior_is_local(self):
        angles = [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4]
        audit = hbt_locality_audit(HbtConfig(n_events=20000, seed=4), angles, angles)
        assert len(audit.verdicts) == 36
        assert audit.all_local
        assert all(verdict.gap <= 1e-9 for _, verdict in audit.verdicts)

    @pytest.mark.slow
    def test_intensities_correlated_while_outcomes_local(self):
        audit = hbt_locality_audit(HbtConfig(alpha1=0.0, alpha2=0.0, n_events=10 ** 6, seed=6))
        assert audit.report.ensemble_covariance > 0.4
        assert audit.all_local

    def test_needs_two_settings(self):
        with pytest.raises(ValidationError):
            hbt_locality_audit(HbtConfig(n_events=10), [0.0], [0.0, 1.0])

    def test_joint_model_factorizes(self):
        model = hbt_joint_model()
        table = model.conditional(0.0, math.pi / 2, [[0.1], [2.0]])
        assert set(np.unique(table)) <= {0.0, 1.0}


def test_event_dump(tmp_path):
    path = tmp_path / "hbt.csv"
    config = HbtConfig(alpha1=0.0, alpha2=0.5, n_events=500, seed=9, chunk_size=200)
    assert write_hbt_events(path, config, limit=250) == 250
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == HBT_EVENT_COLUMNS
    assert len(rows) == 251
    theta, i1, i2, a, b = rows[1]
    assert float(i1) == pytest.approx(1.0 + math.cos(float(theta)), abs=1e-9)
    assert a in ("+1", "-1") and b in ("+1", "-1")


class TestFixedPhase:
    def test_sample_covariance(self):
        assert sample_covariance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(2.0 / 3.0)
        assert sample_covariance([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-2.0 / 3.0)
        assert sample_covariance(np.full(7, 0.1 + 0.2), np.full(7, math.pi)) == 0.0

    def test_sample_covariance_rejects_mismatched(self):
        with pytest.raises(ValidationError):
            sample_covariance([1.0, 2.0], [1.0])

    def test_events_at_fixed_phase_are_constant(self):
        config = HbtConfig(alpha1=0.4, alpha2=2.0)
        i1, i2, a, b = hbt_events(np.full(5, 1.3), config)
        assert len(set(i1.tolist())) == 1 and len(set(i2.tolist())) == 1
        assert i1[0] == hbt_intensity(1.3, 0.4)
        np.testing.assert_array_equal(a, hbt_outcome(np.full(5, 1.3), 0.4))

    def test_joint_table_is_product_of_marginals(self):
        table = hbt_joint_model(0.7).conditional(0.2, 1.9, np.linspace(0.0, 6.0, 25)[:, None])
        p_a = table[:, 0] + table[:, 1]
        p_b = table[:, 0] + table[:, 2]
        np.testing.assert_array_equal(table[:, 0], p_a * p_b)
        np.testing.assert_array_equal(table[:, 3], (1.0 - p_a) * (1.0 - p_b))
