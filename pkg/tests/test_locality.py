"""Tests for the fixed-h locality checks and the behavior-level no-signaling check."""

import math

import numpy as np
import pytest

from bell_lab.behavior import Behavior, pr_box_behavior, uniform_behavior
from bell_lab.errors import ValidationError
from bell_lab.locality import (
    FAIL,
    PASS,
    LocalityGrid,
    LocalityReport,
    check_condition_c,
    check_outcome_independence,
    check_parameter_independence,
    conditional_marginals,
    locality_audit,
    no_signaling_check,
    subsequence_correlation_test,
)
from bell_lab.models import (
    random_local_model,
    sign_model,
    signaling_joint_model,
    singlet_joint_model,
    singlet_reference_behavior,
    stochastic_cosine_model,
)

from conftest import CANONICAL_A, CANONICAL_B


class TestPhaseModelAudit:
    def test_parameter_independence_holds(self, phase_model):
        report = check_parameter_independence(phase_model)
        assert report.max_residual < 1e-12
        assert report.verdict == PASS

    def test_condition_c_fails_by_a_quarter(self, phase_model):
        report = check_condition_c(phase_model)
        assert report.max_residual == pytest.approx(0.25, abs=1e-9)
        assert report.verdict == FAIL
        assert {"a", "b", "h", "outcome_a", "outcome_b"} <= set(report.worst_case)

    def test_outcome_independence_fails_completely(self, phase_model):
        # at equal settings the outcomes are perfectly anticorrelated for every h
        grid = LocalityGrid.of([0.0, math.pi / 3], [0.0, math.pi / 3], n_hidden=8)
        report = check_outcome_independence(phase_model, grid)
        assert report.max_residual == pytest.approx(1.0, abs=1e-9)
        assert report.worst_case["wing"] in ("A", "B")

    def test_audit_order(self, phase_model):
        names = [r.check_name for r in locality_audit(phase_model, LocalityGrid.default(8, 8))]
        assert names == ["condition-c", "parameter-independence", "outcome-independence"]


class TestLocalModels:
    @pytest.mark.parametrize("model", [sign_model(-1), stochastic_cosine_model(0.7)])
    def test_local_models_pass_every_check(self, model):
        for report in locality_audit(model, LocalityGrid.default(8, 16)):
            assert report.max_residual <= 1e-12, report.check_name
            assert report.passed

    @pytest.mark.parametrize("seed", [0, 5, 9])
    def test_random_local_models_factorize(self, seed):
        model = random_local_model(seed)
        grid = LocalityGrid.default(8, 16)
        assert check_condition_c(model, grid).max_residual <= 1e-12
        assert check_parameter_independence(model, grid).max_residual <= 1e-12

    def test_deterministic_model_skips_conditioning_points(self):
        report = check_outcome_independence(sign_model(-1), LocalityGrid.default(4, 8))
        assert report.grid_spec["skipped_points"] > 0
        assert report.max_residual == 0.0


class TestFixtures:
    def test_signaling_model_fails_parameter_independence(self):
        grid = LocalityGrid.of([0.0], [0.5, 4.0])
        report = check_parameter_independence(signaling_joint_model(), grid)
        assert report.max_residual == pytest.approx(1.0)
        assert report.worst_case["wing"] == "A"

    def test_singlet_without_hidden_variables_fails_condition_c(self):
        grid = LocalityGrid.of(CANONICAL_A, CANONICAL_B)
        assert not check_condition_c(singlet_joint_model(), grid).passed
        assert check_parameter_independence(singlet_joint_model(), grid).passed

    def test_conditional_marginals_shape(self, phase_model):
        grid = LocalityGrid.of([0.0, 1.0, 2.0], [0.5], n_hidden=4)
        cond = conditional_marginals(phase_model, grid)
        assert cond.tables.shape == (3, 1, 4, 4)
        np.testing.assert_allclose(cond.marginal_a(), 0.5)


class TestNoSignaling:
    def test_pr_box_is_no_signaling(self):
        assert no_signaling_check(pr_box_behavior()).passed

    def test_singlet_and_uniform_pass(self):
        assert no_signaling_check(singlet_reference_behavior(CANONICAL_A, CANONICAL_B)).passed
        assert no_signaling_check(uniform_behavior(CANONICAL_A, CANONICAL_B)).passed

    def test_remote_dependent_marginal_fails(self):
        cells = np.full((2, 2, 4), 0.25)
        cells[0, 1] = [0.5, 0.5, 0.0, 0.0]
        report = no_signaling_check(Behavior(CANONICAL_A, CANONICAL_B, cells))
        assert report.verdict == FAIL
        assert report.max_residual == pytest.approx(0.5)


class TestReport:
    def test_verdict_follows_residual(self):
        assert LocalityReport("condition-c", 1e-10, {}, 1e-9, {}).verdict == PASS
        assert LocalityReport("condition-c", 2e-9, {}, 1e-9, {}).verdict == FAIL

    def test_round_trip(self, phase_model):
        report = check_condition_c(phase_model, LocalityGrid.default(6, 6))
        again = LocalityReport.from_dict(report.to_dict())
        assert again.to_dict() == report.to_dict()

    def test_inconsistent_verdict_rejected(self):
        data = LocalityReport("no-signaling", 0.5, {}, 1e-9, {}).to_dict()
        data["verdict"] = PASS
        with pytest.raises(ValidationError):
            LocalityReport.from_dict(data)

    def test_unknown_check_name(self):
        with pytest.raises(ValidationError):
            LocalityReport("locality-ish", 0.0, {}, 1e-9, {})


class TestSubsequence:
    def test_local_model_has_no_fixed_h_covariance(self):
        result = subsequence_correlation_test(stochastic_cosine_model(0.5), 0.2, 1.0, [0.7], 20000, seed=1)
        assert abs(result.z_score) < 5

    def test_phase_model_has_strong_fixed_h_covariance(self, phase_model):
        result = subsequence_correlation_test(phase_model, 0.0, 0.0, [0.3], 5000, seed=2)
        assert result.covariance == pytest.approx(-1.0, abs=0.01)
