"""Dispatch of validated experiment configs to the library."""

import logging
from typing import Any, Callable, Dict

from .behavior import Behavior
from .config import ExperimentConfig
from .hbt import HbtConfig, hbt_locality_audit
from .integration import behavior_from_model, integrate_model
from .locality import LocalityGrid, locality_audit
from .metrics import chsh_from_model, maximize_chsh_over_settings
from .models import model_from_dict
from .polytope import membership
from .reports import CSV_LAYOUTS, ExperimentResult, chsh_row, hbt_rows, locality_row, membership_row

logger = logging.getLogger(__name__)


def _integration_echo(config: ExperimentConfig) -> Dict[str, Any]:
    """The integration spec as echoed in reports; the worker count never affects results."""
    return {k: v for k, v in config.integration.to_dict().items() if k != "workers"}


def run_correlate(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_dict(config.model)
    settings_a, settings_b = config.settings_lists()
    averages = integrate_model(model, settings_a, settings_b, config.integration)
    rows = []
    for i, a in enumerate(averages.settings_a):
        for j, b in enumerate(averages.settings_b):
            stderr = None if averages.stderr is None else averages.stderr[i, j]
            rows.append([i, j, a.angle, b.angle, averages.correlators[i, j], stderr])
    payload = {
        "model": config.model,
        "integration": _integration_echo(config),
        "settings_a": [s.angle for s in averages.settings_a],
        "settings_b": [s.angle for s in averages.settings_b],
        "correlators": averages.correlators.tolist(),
        "stderr": None if averages.stderr is None else averages.stderr.tolist(),
        "behavior": averages.behavior().to_dict(),
        "n_samples": averages.n_samples,
    }
    summary = [("pairs", len(rows)), ("method", averages.method), ("samples", averages.n_samples)]
    return ExperimentResult("correlate", payload,
                            ("a_index", "b_index", "a", "b", "E", "stderr"), rows, summary)


def run_chsh(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_dict(config.model)
    result = chsh_from_model(model, config.chsh_settings(), config.integration)
    payload = {"model": config.model, "integration": _integration_echo(config), **result.to_dict()}
    summary = [("S", result.s_value), ("|S|", result.abs_s), ("stderr", result.estimator_stderr)]
    return ExperimentResult("chsh", payload, CSV_LAYOUTS["chsh"], [chsh_row(result)], summary)


def run_maximize(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_dict(config.model)
    settings, result = maximize_chsh_over_settings(model, config.search.grid_n, config.search.refine_iters,
                                                   config.integration)
    payload = {"model": config.model, "search": config.search.to_dict(), **result.to_dict()}
    summary = [("|S| max", result.abs_s), ("settings", ", ".join(f"{s:.6f}" for s in settings))]
    return ExperimentResult("maximize", payload, CSV_LAYOUTS["chsh"], [chsh_row(result)], summary)


def run_check_locality(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_dict(config.model)
    grid_spec = config.grid
    n_hidden = grid_spec.n_hidden if grid_spec is not None else LocalityGrid.default().n_hidden
    if config.settings:
        settings_a, settings_b = config.settings_lists()
        grid = LocalityGrid.of(settings_a, settings_b, n_hidden)
    elif grid_spec is not None:
        grid = LocalityGrid.default(grid_spec.n_settings, grid_spec.n_hidden)
    else:
        grid = LocalityGrid.default()
    reports = locality_audit(model, grid, config.tolerance)
    payload = {"model": config.model, "reports": [r.to_dict() for r in reports]}
    summary = [(r.check_name, f"{r.verdict} ({r.max_residual:.3e})") for r in reports]
    return ExperimentResult("check-locality", payload, CSV_LAYOUTS["locality"],
                            [locality_row(r) for r in reports], summary)


def run_polytope_membership(config: ExperimentConfig) -> ExperimentResult:
    if config.behavior is not None:
        behavior = Behavior.from_dict(config.behavior)
    else:
        settings_a, settings_b = config.settings_lists()
        behavior = behavior_from_model(model_from_dict(config.model), settings_a, settings_b,
                                       config.integration)
    verdict = membership(behavior, config.tolerance, exact=config.exact)
    payload = {"behavior": behavior.to_dict(), "exact": config.exact, **verdict.to_dict()}
    summary = [("status", verdict.status), ("gap", verdict.gap)]
    return ExperimentResult("polytope-membership", payload, CSV_LAYOUTS["membership"],
                            [membership_row(verdict)], summary)


def run_hbt(config: ExperimentConfig) -> ExperimentResult:
    hbt_config = config.hbt or HbtConfig()
    audit = hbt_locality_audit(hbt_config, tol=config.tolerance)
    payload = {"run": audit.report.to_dict(), "audit": audit.to_dict()}
    rows = hbt_rows(audit.report)
    rows.append(["condition_c_residual", audit.condition_c.max_residual])
    rows.append(["all_local", str(audit.all_local).lower()])
    summary = [
        ("covariance", f"{audit.report.ensemble_covariance:.6f} +/- {audit.report.ensemble_stderr:.6f}"),
        ("analytic", audit.report.analytic_covariance),
        ("fixed-h covariance", audit.report.fixed_h_covariance),
        ("all local", audit.all_local),
    ]
    return ExperimentResult("hbt", payload, CSV_LAYOUTS["hbt"], rows, summary)


EXPERIMENT_RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "correlate": run_correlate,
    "chsh": run_chsh,
    "maximize": run_maximize,
    "check-locality": run_check_locality,
    "polytope-membership": run_polytope_membership,
    "hbt": run_hbt,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the experiment named in ``config``."""
    logger.info(f"Running experiment {config.experiment!r}")
    return EXPERIMENT_RUNNERS[config.experiment](config)
