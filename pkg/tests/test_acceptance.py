"""End-to-end checks of the headline numbers."""

import math

import numpy as np
import pytest

from bell_lab.config import ConfigLoader
from bell_lab.experiments import run_experiment
from bell_lab.hbt import HbtConfig, hbt_locality_audit, hbt_run
from bell_lab.integration import IntegrationSpec, integrate_model
from bell_lab.locality import LocalityGrid, locality_audit
from bell_lab.metrics import chsh_from_model, maximize_chsh_over_settings
from bell_lab.models import random_local_model, singlet_joint_model
from bell_lab.polytope import (
    chsh_inequalities,
    enumerate_deterministic_vertices,
    local_bound_chsh,
    membership,
    random_no_signaling_behavior,
)
from bell_lab.reports import report_emit

from conftest import CANONICAL_A, CANONICAL_B, TSIRELSON


class TestLocalPolytope:
    def test_sixteen_vertices_and_integer_bound(self):
        assert len(enumerate_deterministic_vertices()) == 16
        bound = local_bound_chsh()
        assert bound == 2 and isinstance(bound, int)

    def test_singlet_is_nonlocal_at_tsirelson(self):
        result = chsh_from_model(singlet_joint_model(), [*CANONICAL_A, *CANONICAL_B])
        assert result.abs_s == pytest.approx(TSIRELSON, abs=1e-9)
        behavior = integrate_model(singlet_joint_model(), CANONICAL_A, CANONICAL_B).behavior()
        verdict = membership(behavior)
        assert verdict.status == "nonlocal"
        assert verdict.violated_inequality["value"] == pytest.approx(TSIRELSON, abs=1e-9)

    def test_solver_agrees_with_chsh_on_random_behaviors(self):
        rng = np.random.default_rng(1000)
        disagreements = 0
        for _ in range(1000):
            behavior = random_no_signaling_behavior(rng)
            verdict = membership(behavior)
            chsh_local = chsh_inequalities(behavior).max() <= 2.0 + 1e-9
            disagreements += verdict.is_local != chsh_local
        assert disagreements == 0


class TestPhaseModel:
    def test_correlators_are_singlet_values(self, phase_model):
        angles = np.linspace(0.0, 2 * math.pi, 9, endpoint=False)
        averages = integrate_model(phase_model, angles, angles)
        expected = -np.cos(angles[:, None] - angles[None, :])
        np.testing.assert_allclose(averages.correlators, expected, atol=1e-9)

    @pytest.mark.slow
    def test_monte_carlo_million_samples(self, phase_model):
        spec = IntegrationSpec(method="monte-carlo", n=10 ** 6, seed=3, workers=2)
        averages = integrate_model(phase_model, [0.0, 1.0], [0.4, 2.5], spec)
        expected = -np.cos(np.array([0.0, 1.0])[:, None] - np.array([0.4, 2.5])[None, :])
        assert np.all(np.abs(averages.correlators - expected) <= 5 * averages.stderr + 1e-12)

    def test_maximization_reaches_tsirelson(self, phase_model):
        _, result = maximize_chsh_over_settings(phase_model, grid_n=8, refine_iters=3,
                                                integration=IntegrationSpec(n=64))
        assert result.abs_s == pytest.approx(TSIRELSON, abs=1e-4)

    def test_locality_audit(self, phase_model):
        reports = {r.check_name: r for r in locality_audit(phase_model, LocalityGrid.default())}
        assert reports["parameter-independence"].max_residual < 1e-12
        assert reports["condition-c"].max_residual == pytest.approx(0.25, abs=1e-9)
        assert reports["outcome-independence"].max_residual == pytest.approx(1.0, abs=1e-9)


@pytest.mark.slow
def test_random_local_models_never_violate():
    angles = np.arange(16) * (2 * math.pi / 16)
    violations = 0
    for seed in range(100):
        e = integrate_model(random_local_model(seed), angles, angles).correlators
        s = (e[:, None, :, None] + e[:, None, None, :] + e[None, :, :, None] - e[None, :, None, :])
        violations += np.abs(s).max() > 2.0 + 1e-9
    assert violations == 0


class TestHbt:
    @pytest.mark.parametrize("delta", [0.0, math.pi / 4, math.pi / 2, math.pi])
    def test_covariance(self, delta):
        report = hbt_run(HbtConfig(alpha1=delta, n_events=10 ** 5, seed=42))
        assert abs(report.ensemble_covariance - 0.5 * math.cos(delta)) <= 5 * report.ensemble_stderr
        assert report.fixed_h_covariance == 0.0

    def test_binary_behaviors_are_local(self):
        angles = [0.0, math.pi / 3, 2 * math.pi / 3]
        audit = hbt_locality_audit(HbtConfig(n_events=50000, seed=7), angles, angles)
        assert audit.all_local
        assert audit.condition_c.max_residual == 0.0


def test_repeated_runs_are_byte_identical():
    data = {
        "experiment": "chsh",
        "model": {"type": "random-local", "seed": 4},
        "settings": {"chsh": [0.0, 1.0, 2.0, 3.0]},
        "integration": {"method": "monte-carlo", "n": 5000, "seed": 1, "chunk_size": 700},
    }
    reports = set()
    for workers in (1, 2, 3):
        config = ConfigLoader(environ={}).load_dict(data, workers=workers)
        reports.add(report_emit(run_experiment(config), "json"))
    assert len(reports) == 1
