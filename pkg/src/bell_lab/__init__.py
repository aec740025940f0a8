"""bell-lab - local causality, Bell inequalities and the local polytope, as executable checks."""

from .version import __version__, __version_info__
from .behavior import Behavior, Outcome, Setting, pr_box_behavior, uniform_behavior
from .errors import (
    BellLabError,
    ConfigValidationError,
    DimensionError,
    EmptyCellError,
    IntegrationError,
    InvalidOutcomeError,
    SignalingBehaviorError,
    SolverError,
    UnsupportedFormatError,
    ValidationError,
)
from .models import (
    HiddenSample,
    JointModel,
    LocalModel,
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
    unnikrishnan_amplitude_correlation,
    unnikrishnan_joint_probability,
    unnikrishnan_model,
)
from .integration import IntegrationSpec, behavior_from_model, integrate_model
from .locality import (
    LocalityGrid,
    LocalityReport,
    check_condition_c,
    check_outcome_independence,
    check_parameter_independence,
    locality_audit,
    no_signaling_check,
    subsequence_correlation_test,
)
from .metrics import (
    ChshResult,
    chsh,
    chsh_from_behavior,
    chsh_from_model,
    correlation_eq1,
    correlation_joint,
    empirical_correlation,
    maximize_chsh_over_settings,
    simulate_events,
)
from .polytope import (
    MembershipVerdict,
    chsh_bounds,
    chsh_inequalities,
    enumerate_deterministic_vertices,
    local_bound_chsh,
    membership,
    random_no_signaling_behavior,
)
from .hbt import HbtConfig, HbtReport, hbt_intensity, hbt_locality_audit, hbt_run
from .reports import report_emit

__all__ = [
    "__version__", "__version_info__",
    "Behavior", "Outcome", "Setting", "pr_box_behavior", "uniform_behavior",
    "BellLabError", "ConfigValidationError", "DimensionError", "EmptyCellError", "IntegrationError",
    "InvalidOutcomeError", "SignalingBehaviorError", "SolverError", "UnsupportedFormatError",
    "ValidationError",
    "HiddenSample", "JointModel", "LocalModel", "UniformAngleSource", "UnnikrishnanParams",
    "constant_model", "deterministic_lhv", "model_from_dict", "random_local_model", "sign_model",
    "signaling_joint_model", "singlet_joint_model", "singlet_reference_behavior",
    "stochastic_cosine_model", "unnikrishnan_amplitude_correlation", "unnikrishnan_joint_probability",
    "unnikrishnan_model",
    "IntegrationSpec", "behavior_from_model", "integrate_model",
    "LocalityGrid", "LocalityReport", "check_condition_c", "check_outcome_independence",
    "check_parameter_independence", "locality_audit", "no_signaling_check",
    "subsequence_correlation_test",
    "ChshResult", "chsh", "chsh_from_behavior", "chsh_from_model", "correlation_eq1",
    "correlation_joint", "empirical_correlation", "maximize_chsh_over_settings", "simulate_events",
    "MembershipVerdict", "chsh_bounds", "chsh_inequalities", "enumerate_deterministic_vertices",
    "local_bound_chsh", "membership", "random_no_signaling_behavior",
    "HbtConfig", "HbtReport", "hbt_intensity", "hbt_locality_audit", "hbt_run",
    "report_emit",
]
