"""Tests for hidden sources, local and joint models and the phase-correlation model."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bell_lab.errors import InvalidOutcomeError, ValidationError
from bell_lab.models import (
    DiscreteSource,
    HiddenSample,
    JointModel,
    LocalModel,
    PointSource,
    UniformAngleSource,
    UnnikrishnanParams,
    constant_model,
    deterministic_lhv,
    model_from_dict,
    random_local_model,
    sign_model,
    signaling_joint_model,
    singlet_joint_model,
    singlet_reference_behavior,
    stochastic_cosine_model,
    unnikrishnan_amplitude,
    unnikrishnan_amplitude_correlation,
    unnikrishnan_joint_probability,
    unnikrishnan_model,
)

from conftest import CANONICAL_A, CANONICAL_B

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


class TestSources:
    def test_hidden_sample_rejects_negative_weight(self):
        with pytest.raises(ValidationError):
            HiddenSample((0.1,), weight=-1.0)

    def test_uniform_quadrature_is_normalized(self):
        nodes, weights = UniformAngleSource(2).quadrature(4096)
        assert nodes.shape == (4096, 2)
        assert weights.sum() == pytest.approx(1.0)

    def test_sampling_is_seeded(self):
        source = UniformAngleSource(1)
        first, _ = source.sample(np.random.default_rng(3), 10)
        second, _ = source.sample(np.random.default_rng(3), 10)
        np.testing.assert_array_equal(first, second)
        assert np.all((first >= 0) & (first < 2 * math.pi))

    def test_call_draws_one_sample(self, rng):
        sample = UniformAngleSource(3)(rng)
        assert sample.dim == 3
        assert sample.as_array().shape == (1, 3)

    def test_discrete_source_validates_probabilities(self):
        with pytest.raises(ValidationError):
            DiscreteSource([[0.0], [1.0]], [0.7, 0.7])

    def test_point_source_quadrature_is_exact(self):
        nodes, weights = PointSource((0.3,)).quadrature(4096)
        np.testing.assert_array_equal(nodes, [[0.3]])
        np.testing.assert_array_equal(weights, [1.0])


class TestDeterministicModels:
    def test_constant_outcomes_give_unit_correlation(self):
        model = constant_model(1, 1)
        joint = model.as_joint()
        table = joint.conditional(0.3, 1.7, [[0.0]])
        np.testing.assert_array_equal(table, [[1.0, 0.0, 0.0, 0.0]])

    def test_strategy_returning_zero_is_rejected(self):
        with pytest.raises(InvalidOutcomeError):
            deterministic_lhv(lambda a, h: np.zeros(len(h)), lambda b, h: np.ones(len(h)),
                              UniformAngleSource(1))

    def test_sign_model_outcomes(self):
        model = sign_model(-1)
        h = np.array([[0.0], [math.pi]])
        np.testing.assert_array_equal(model.prob_a(0.0, h), [1.0, 0.0])
        np.testing.assert_array_equal(model.prob_b(0.0, h), [0.0, 1.0])

    def test_as_joint_is_a_product(self):
        model = stochastic_cosine_model(0.8)
        h = np.array([[0.2], [1.3], [4.0]])
        table = model.as_joint().conditional(0.5, 2.0, h)
        pa, pb = model.prob_a(0.5, h), model.prob_b(2.0, h)
        np.testing.assert_allclose(table[:, 0], pa * pb)
        np.testing.assert_allclose(table.sum(axis=1), 1.0)


class TestStochasticModels:
    def test_visibility_out_of_range(self):
        with pytest.raises(ValidationError):
            stochastic_cosine_model(1.5)

    def test_random_local_model_is_reproducible(self):
        h = UniformAngleSource(1).grid(16)
        first = random_local_model(7).prob_a(1.1, h)
        second = random_local_model(7).prob_a(1.1, h)
        np.testing.assert_array_equal(first, second)
        assert np.all((first >= 0.0) & (first <= 1.0))

    def test_random_local_model_depends_on_seed(self):
        h = UniformAngleSource(1).grid(64)
        assert not np.array_equal(random_local_model(1).prob_a(0.4, h), random_local_model(2).prob_a(0.4, h))


class TestSinglet:
    def test_reference_behavior_cells(self):
        behavior = singlet_reference_behavior([0.0], [0.0])
        np.testing.assert_allclose(behavior.cell(0, 0), [0.0, 0.5, 0.5, 0.0])

    def test_reference_correlators(self):
        behavior = singlet_reference_behavior(CANONICAL_A, CANONICAL_B)
        expected = [[-math.cos(a - b) for b in CANONICAL_B] for a in CANONICAL_A]
        np.testing.assert_allclose(behavior.correlators(), expected, atol=1e-15)

    def test_joint_model_has_one_hidden_point(self):
        model = singlet_joint_model()
        assert isinstance(model, JointModel)
        np.testing.assert_allclose(model.conditional(0.0, math.pi / 2, [[0.0]]), [[0.25] * 4])

    def test_signaling_model_marginal_depends_on_remote_setting(self):
        model = signaling_joint_model()
        near = model.conditional(0.0, 0.5, [[0.0]])[0]
        far = model.conditional(0.0, 4.0, [[0.0]])[0]
        assert near[0] + near[1] == 1.0
        assert far[0] + far[1] == 0.0


class TestPhaseModel:
    def test_s_must_be_positive(self):
        with pytest.raises(ValidationError):
            UnnikrishnanParams(s=0.0)
        with pytest.raises(ValidationError):
            unnikrishnan_joint_probability(0.0, 0.0, 0.0, 0.0, -1.0, 1, 1)

    def test_equal_settings_opposite_phases(self):
        # s = 1/2, phi1 - phi2 = pi: cos(pi) = -1, so A = -B with certainty
        p = {(a, b): unnikrishnan_joint_probability(0.0, 0.0, math.pi, 0.0, 0.5, a, b)
             for a in (1, -1) for b in (1, -1)}
        assert p[(1, 1)] == pytest.approx(0.0, abs=1e-15)
        assert p[(1, -1)] == pytest.approx(0.5)
        assert p[(-1, 1)] == pytest.approx(0.5)
        assert p[(-1, -1)] == pytest.approx(0.0, abs=1e-15)

    def test_quarter_turn_is_uniform(self):
        for a in (1, -1):
            for b in (1, -1):
                assert unnikrishnan_joint_probability(math.pi / 2, 0.0, 0.0, 0.0, 0.5, a, b) == pytest.approx(0.25)

    def test_amplitude_correlation(self):
        assert unnikrishnan_amplitude_correlation(0.0, 0.0, 0.0, 0.0, 0.5) == pytest.approx(1.0)
        assert unnikrishnan_amplitude_correlation(math.pi, 0.0, 0.0, 0.0, 0.5) == pytest.approx(0.0, abs=1e-15)
        # s(q1 - q2) + s(phi1 - phi2) = pi, reached through the settings and through the phases
        assert unnikrishnan_amplitude_correlation(2 * math.pi, 0.0, 0.0, 0.0, 0.5) == pytest.approx(-1.0)
        assert unnikrishnan_amplitude_correlation(0.0, 0.0, 2 * math.pi, 0.0, 0.5) == pytest.approx(-1.0)
        assert abs(unnikrishnan_amplitude(0.3, 1.2, 0.5, -1)) == pytest.approx(1.0)

    def test_settings_are_not_wrapped_before_differencing(self):
        base = unnikrishnan_joint_probability(6.0, 0.0, 0.0, 0.0, 0.3, 1, 1)
        shifted = unnikrishnan_joint_probability(6.5, 0.5, 0.0, 0.0, 0.3, 1, 1)
        assert shifted == pytest.approx(base, abs=1e-12)
        assert base == pytest.approx(0.5 * math.cos(0.3 * 6.0) ** 2, abs=1e-12)

    @settings(derandomize=True, max_examples=100)
    @given(angles, angles, angles, angles, st.floats(min_value=0.1, max_value=3.0), angles)
    def test_normalized_and_phase_shift_invariant(self, q1, q2, phi1, phi2, s, shift):
        total = sum(unnikrishnan_joint_probability(q1, q2, phi1, phi2, s, a, b)
                    for a in (1, -1) for b in (1, -1))
        assert total == pytest.approx(1.0, abs=1e-12)
        base = unnikrishnan_joint_probability(q1, q2, phi1, phi2, s, 1, 1)
        shifted = unnikrishnan_joint_probability(q1, q2, phi1 + shift, phi2 + shift, s, 1, 1)
        assert shifted == pytest.approx(base, abs=1e-9)

    @settings(derandomize=True, max_examples=100)
    @given(angles, angles, angles, angles, st.sampled_from([0.3, 0.7, 1.1, 1.3, 2.35]), angles)
    def test_setting_shift_invariant(self, q1, q2, phi1, phi2, s, shift):
        for a in (1, -1):
            for b in (1, -1):
                base = unnikrishnan_joint_probability(q1, q2, phi1, phi2, s, a, b)
                shifted = unnikrishnan_joint_probability(q1 + shift, q2 + shift, phi1, phi2, s, a, b)
                assert shifted == pytest.approx(base, abs=1e-9)
        base = unnikrishnan_amplitude_correlation(q1, q2, phi1, phi2, s)
        shifted = unnikrishnan_amplitude_correlation(q1 + shift, q2 + shift, phi1, phi2, s)
        assert shifted == pytest.approx(base, abs=1e-9)

    def test_model_reproduces_singlet_conditionals(self, phase_model):
        h = UniformAngleSource(1).grid(8)
        table = phase_model.conditional(0.3, 1.1, h)
        expected = singlet_reference_behavior([0.3], [1.1]).cell(0, 0)
        np.testing.assert_allclose(table, np.tile(expected, (len(h), 1)), atol=1e-12)

    def test_phase_sampler(self, rng):
        phi1, phi2 = UnnikrishnanParams(delta_phi=1.0).phase_sampler(rng, 5)
        np.testing.assert_allclose(phi1 - phi2, 1.0)


class TestDescriptors:
    @pytest.mark.parametrize("descriptor, kind", [
        ({"type": "constant", "outcome_a": -1}, LocalModel),
        ({"type": "deterministic-sign"}, LocalModel),
        ({"type": "stochastic-cosine", "visibility": 0.5}, LocalModel),
        ({"type": "random-local", "seed": 4}, LocalModel),
        ({"type": "unnikrishnan", "s": 0.5, "delta_phi": 3.14}, JointModel),
        ({"type": "singlet-reference"}, JointModel),
        ({"type": "signaling-example"}, JointModel),
        ({"type": "hbt", "threshold": 1.0}, JointModel),
    ])
    def test_builds_every_type(self, descriptor, kind):
        assert isinstance(model_from_dict(descriptor), kind)

    def test_unknown_type(self):
        with pytest.raises(ValidationError, match="Unknown model type"):
            model_from_dict({"type": "hidden-bananas"})

    def test_bad_parameter(self):
        with pytest.raises(ValidationError):
            model_from_dict({"type": "unnikrishnan", "s": -2})

    def test_missing_type(self):
        with pytest.raises(ValidationError):
            model_from_dict({"s": 0.5})

    def test_unnikrishnan_params_echoed(self):
        model = unnikrishnan_model(UnnikrishnanParams(s=1.5, delta_phi=0.2))
        assert model.describe()["s"] == 1.5
