"""Verdicts for the locality conditions: Condition C, parameter and outcome independence.

All model-level checks evaluate the joint conditional p(A,B|a,b,h) at fixed h
on a deterministic grid (settings x hidden points), because Condition C is a
statement about fixed common causes and cannot be read off a behavior.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import OUTCOME_PAIRS, TWO_PI, Behavior, Setting, as_settings
from .errors import ValidationError
from .models import AnyModel, JointModel, as_joint_model

logger = logging.getLogger(__name__)

CHECK_NAMES = ("condition-c", "parameter-independence", "outcome-independence", "no-signaling")
PASS, FAIL = "pass", "fail"

DEFAULT_TOLERANCE = 1e-9
DEFAULT_SETTING_POINTS = 24
DEFAULT_HIDDEN_POINTS = 32
# Conditioning on an outcome rarer than this is undefined and skipped.
CONDITIONING_FLOOR = 1e-12


@dataclass
class LocalityReport:
    """Outcome of one locality check.

    The verdict is ``pass`` exactly when ``max_residual <= tolerance``;
    ``worst_case`` records where the maximum was attained.
    """
    check_name: str
    max_residual: float
    worst_case: Dict[str, Any]
    tolerance: float
    grid_spec: Dict[str, Any]
    verdict: str = field(init=False)

    def __post_init__(self):
        if self.check_name not in CHECK_NAMES:
            raise ValidationError(f"Unknown check name {self.check_name!r}")
        if not self.max_residual >= 0.0:
            raise ValidationError(f"max_residual must be nonnegative, got {self.max_residual!r}")
        self.max_residual = float(self.max_residual)
        self.tolerance = float(self.tolerance)
        self.verdict = PASS if self.max_residual <= self.tolerance else FAIL

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check_name": self.check_name,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "worst_case": self.worst_case,
            "grid_spec": self.grid_spec,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LocalityReport':
        report = cls(
            check_name=data["check_name"],
            max_residual=data["max_residual"],
            worst_case=dict(data.get("worst_case", {})),
            tolerance=data["tolerance"],
            grid_spec=dict(data.get("grid_spec", {})),
        )
        if "verdict" in data and data["verdict"] != report.verdict:
            raise ValidationError(
                f"Inconsistent report: verdict {data['verdict']!r} but residual "
                f"{report.max_residual} vs tolerance {report.tolerance}"
            )
        return report


@dataclass(frozen=True)
class LocalityGrid:
    """Evaluation points for the fixed-h checks."""
    settings_a: Tuple[Setting, ...]
    settings_b: Tuple[Setting, ...]
    n_hidden: int = DEFAULT_HIDDEN_POINTS

    @classmethod
    def default(cls, n_settings: int = DEFAULT_SETTING_POINTS,
                n_hidden: int = DEFAULT_HIDDEN_POINTS) -> 'LocalityGrid':
        """n_settings evenly spaced angles on each axis, starting at 0."""
        if n_settings < 1 or n_hidden < 1:
            raise ValidationError("Locality grids need at least one point per axis")
        angles = [k * TWO_PI / n_settings for k in range(n_settings)]
        return cls(as_settings(angles), as_settings(angles), n_hidden)

    @classmethod
    def of(cls, settings_a: Sequence[Union[Setting, float]], settings_b: Sequence[Union[Setting, float]],
           n_hidden: int = DEFAULT_HIDDEN_POINTS) -> 'LocalityGrid':
        sa, sb = as_settings(settings_a), as_settings(settings_b)
        if not sa or not sb:
            raise ValidationError("Locality grids need at least one setting per wing")
        return cls(sa, sb, n_hidden)

    def describe(self, model: JointModel) -> Dict[str, Any]:
        hidden = model.source.grid(self.n_hidden)
        return {
            "settings_a": [s.angle for s in self.settings_a],
            "settings_b": [s.angle for s in self.settings_b],
            "hidden_points": int(len(hidden)),
            "hidden_source": model.source.describe()["kind"],
        }


@dataclass(frozen=True, eq=False)
class ConditionalTables:
    """p(A,B|a,b,h) on a grid, shape (na, nb, nh, 4), plus the hidden points."""
    tables: np.ndarray
    hidden: np.ndarray
    grid: LocalityGrid

    def marginal_a(self) -> np.ndarray:
        """p(A=+|a,b,h), shape (na, nb, nh)."""
        return self.tables[..., 0] + self.tables[..., 1]

    def marginal_b(self) -> np.ndarray:
        """p(B=+|a,b,h), shape (na, nb, nh)."""
        return self.tables[..., 0] + self.tables[..., 2]


def conditional_marginals(model: AnyModel, grid: Optional[LocalityGrid] = None) -> ConditionalTables:
    """Evaluate the joint conditional of the model on every grid point."""
    joint = as_joint_model(model)
    grid = grid or LocalityGrid.default()
    hidden = joint.source.grid(grid.n_hidden)
    tables = np.empty((len(grid.settings_a), len(grid.settings_b), len(hidden), 4))
    for i, a in enumerate(grid.settings_a):
        for j, b in enumerate(grid.settings_b):
            tables[i, j] = joint.conditional(a, b, hidden)
    return ConditionalTables(tables, hidden, grid)


def _point(grid: LocalityGrid, hidden: np.ndarray, i: int, j: int, k: int) -> Dict[str, Any]:
    return {
        "a": grid.settings_a[i].angle,
        "b": grid.settings_b[j].angle,
        "a_index": int(i),
        "b_index": int(j),
        "h": hidden[k].tolist(),
    }


def check_condition_c(model: AnyModel, grid: Optional[LocalityGrid] = None,
                      tol: float = DEFAULT_TOLERANCE) -> LocalityReport:
    """Fixed-h factorization: max |p(A,B|a,b,h) - p(A|a,b,h) p(B|a,b,h)|."""
    joint = as_joint_model(model)
    cond = conditional_marginals(joint, grid)
    pa, pb = cond.marginal_a(), cond.marginal_b()
    products = np.stack([
        pa * pb, pa * (1.0 - pb), (1.0 - pa) * pb, (1.0 - pa) * (1.0 - pb)
    ], axis=-1)
    residuals = np.abs(cond.tables - products)
    flat = int(np.argmax(residuals))
    i, j, k, m = np.unravel_index(flat, residuals.shape)
    worst = _point(cond.grid, cond.hidden, i, j, k)
    worst.update({"outcome_a": OUTCOME_PAIRS[m][0], "outcome_b": OUTCOME_PAIRS[m][1],
                  "joint": float(cond.tables[i, j, k, m]), "product": float(products[i, j, k, m]),
                  "residual": float(residuals[i, j, k, m])})
    report = LocalityReport("condition-c", float(residuals[i, j, k, m]), worst, tol,
                            cond.grid.describe(joint))
    logger.debug(f"condition-c on {joint.name!r}: residual {report.max_residual:.3e}")
    return report


def check_parameter_independence(model: AnyModel, grid: Optional[LocalityGrid] = None,
                                 tol: float = DEFAULT_TOLERANCE) -> LocalityReport:
    """max |p(A|a,b,h) - p(A|a,b',h)| and the wing-B analogue over a, a'."""
    joint = as_joint_model(model)
    cond = conditional_marginals(joint, grid)
    pa, pb = cond.marginal_a(), cond.marginal_b()

    # wing A: spread over the remote setting axis (axis 1)
    spread_a = pa.max(axis=1) - pa.min(axis=1)  # (na, nh)
    spread_b = pb.max(axis=0) - pb.min(axis=0)  # (nb, nh)
    best_a, best_b = float(spread_a.max()), float(spread_b.max())

    if best_a >= best_b:
        i, k = np.unravel_index(int(np.argmax(spread_a)), spread_a.shape)
        j_hi, j_lo = int(np.argmax(pa[i, :, k])), int(np.argmin(pa[i, :, k]))
        worst = _point(cond.grid, cond.hidden, i, j_hi, k)
        worst.update({"wing": "A", "remote_setting": cond.grid.settings_b[j_hi].angle,
                      "other_remote_setting": cond.grid.settings_b[j_lo].angle,
                      "residual": best_a})
        residual = best_a
    else:
        j, k = np.unravel_index(int(np.argmax(spread_b)), spread_b.shape)
        i_hi, i_lo = int(np.argmax(pb[:, j, k])), int(np.argmin(pb[:, j, k]))
        worst = _point(cond.grid, cond.hidden, i_hi, j, k)
        worst.update({"wing": "B", "remote_setting": cond.grid.settings_a[i_hi].angle,
                      "other_remote_setting": cond.grid.settings_a[i_lo].angle,
                      "residual": best_b})
        residual = best_b
    return LocalityReport("parameter-independence", residual, worst, tol, cond.grid.describe(joint))


def check_outcome_independence(model: AnyModel, grid: Optional[LocalityGrid] = None,
                               tol: float = DEFAULT_TOLERANCE) -> LocalityReport:
    """max |p(A=+|a,b,B=+,h) - p(A=+|a,b,B=-,h)|, and the same with the wings swapped.

    Points where the conditioning outcome has probability below 1e-12 are skipped.
    """
    joint = as_joint_model(model)
    cond = conditional_marginals(joint, grid)
    t = cond.tables
    pb_plus, pa_plus = cond.marginal_b(), cond.marginal_a()
    pb_minus, pa_minus = 1.0 - pb_plus, 1.0 - pa_plus

    valid_b = (pb_plus >= CONDITIONING_FLOOR) & (pb_minus >= CONDITIONING_FLOOR)
    valid_a = (pa_plus >= CONDITIONING_FLOOR) & (pa_minus >= CONDITIONING_FLOOR)
    with np.errstate(divide='ignore', invalid='ignore'):
        a_given_b = np.abs(t[..., 0] / pb_plus - t[..., 1] / pb_minus)
        b_given_a = np.abs(t[..., 0] / pa_plus - t[..., 2] / pa_minus)
    a_given_b = np.where(valid_b, a_given_b, -np.inf)
    b_given_a = np.where(valid_a, b_given_a, -np.inf)

    skipped = int((~valid_b).sum() + (~valid_a).sum())
    if skipped:
        logger.debug(f"outcome-independence skipped {skipped} zero-probability conditioning point(s)")

    grid_spec = cond.grid.describe(joint)
    grid_spec["skipped_points"] = skipped
    if not np.isfinite(a_given_b).any() and not np.isfinite(b_given_a).any():
        return LocalityReport("outcome-independence", 0.0, {"note": "every point skipped"}, tol, grid_spec)

    if a_given_b.max() >= b_given_a.max():
        values, wing = a_given_b, "A"
    else:
        values, wing = b_given_a, "B"
    i, j, k = np.unravel_index(int(np.argmax(values)), values.shape)
    residual = float(values[i, j, k])
    worst = _point(cond.grid, cond.hidden, i, j, k)
    worst.update({"wing": wing, "residual": residual})
    return LocalityReport("outcome-independence", residual, worst, tol, grid_spec)


def no_signaling_check(behavior: Behavior, tol: float = DEFAULT_TOLERANCE) -> LocalityReport:
    """max over |sum_B p(A,B|a,b) - sum_B p(A,B|a,b')| and the wing-B analogue."""
    ma, mb = behavior.marginals_a(), behavior.marginals_b()
    spread_a = ma.max(axis=1) - ma.min(axis=1)  # per a-index
    spread_b = mb.max(axis=0) - mb.min(axis=0)  # per b-index
    grid_spec = {
        "settings_a": [s.angle for s in behavior.settings_a],
        "settings_b": [s.angle for s in behavior.settings_b],
        "kind": "behavior",
    }
    if spread_a.max() >= spread_b.max():
        i = int(np.argmax(spread_a))
        worst = {"wing": "A", "a_index": i, "b_index": int(np.argmax(ma[i])),
                 "other_b_index": int(np.argmin(ma[i])), "residual": float(spread_a[i])}
        residual = float(spread_a[i])
    else:
        j = int(np.argmax(spread_b))
        worst = {"wing": "B", "b_index": j, "a_index": int(np.argmax(mb[:, j])),
                 "other_a_index": int(np.argmin(mb[:, j])), "residual": float(spread_b[j])}
        residual = float(spread_b[j])
    return LocalityReport("no-signaling", residual, worst, tol, grid_spec)


def locality_audit(model: AnyModel, grid: Optional[LocalityGrid] = None,
                   tol: float = DEFAULT_TOLERANCE) -> List[LocalityReport]:
    """The three model-level checks, in a fixed order."""
    grid = grid or LocalityGrid.default()
    return [
        check_condition_c(model, grid, tol),
        check_parameter_independence(model, grid, tol),
        check_outcome_independence(model, grid, tol),
    ]


@dataclass(frozen=True)
class SubsequenceTest:
    """Sample covariance of the A and B outcome sequences at one fixed h."""
    setting_a: float
    setting_b: float
    hidden: Tuple[float, ...]
    n_events: int
    covariance: float
    stderr: float

    @property
    def z_score(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.covariance == 0.0 else float('inf')
        return self.covariance / self.stderr

    def to_dict(self) -> Dict[str, Any]:
        return {"setting_a": self.setting_a, "setting_b": self.setting_b, "hidden": list(self.hidden),
                "n_events": self.n_events, "covariance": self.covariance, "stderr": self.stderr,
                "z_score": self.z_score}


def subsequence_correlation_test(model: AnyModel, setting_a: Union[Setting, float],
                                 setting_b: Union[Setting, float], hidden: Sequence[float],
                                 n_events: int, seed: int) -> SubsequenceTest:
    """Simulate a subsequence of events sharing one h and measure outcome covariance.

    Condition C predicts a covariance of zero (within sampling error) for every
    fixed h; the phase model breaks this whenever its conditional is correlated.
    """
    if n_events < 2:
        raise ValidationError("subsequence_correlation_test needs at least 2 events")
    joint = as_joint_model(model)
    h = np.asarray(hidden, dtype=float).reshape(1, -1)
    table = joint.conditional(setting_a, setting_b, h)[0]
    rng = np.random.default_rng(seed)
    picks = rng.choice(4, size=n_events, p=table / table.sum())
    pairs = np.array(OUTCOME_PAIRS, dtype=float)[picks]
    a, b = pairs[:, 0], pairs[:, 1]
    centered = (a - a.mean()) * (b - b.mean())
    covariance = float(centered.mean())
    stderr = float(centered.std(ddof=1) / np.sqrt(n_events))
    return SubsequenceTest(Setting.of(setting_a).angle, Setting.of(setting_b).angle,
                           tuple(h[0].tolist()), int(n_events), covariance, stderr)

