"""Correlation functions, the CHSH combination and its maximization over settings."""

import csv
import math
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import OUTCOME_PAIRS, TWO_PI, Behavior, Setting, as_settings
from .errors import EmptyCellError, InvalidOutcomeError, ValidationError
from .integration import QUADRATURE, IntegrationSpec, integrate_model
from .models import AnyModel, JointModel, LocalModel, as_joint_model

logger = logging.getLogger(__name__)

CORRELATOR_TOL = 1e-9
EVENT_COLUMNS = ("a_index", "b_index", "outcome_a", "outcome_b")

CorrelatorFunction = Callable[[float, float], float]
ChshTarget = Union[LocalModel, JointModel, Behavior, CorrelatorFunction]


@dataclass(frozen=True)
class ChshResult:
    """S = E(a,b) + E(a,b') + E(a',b) - E(a',b').

    ``settings`` is (a, a', b, b') and ``correlators`` is
    (E(a,b), E(a,b'), E(a',b), E(a',b')).
    """
    settings: Optional[Tuple[float, float, float, float]]
    correlators: Tuple[float, float, float, float]
    s_value: float
    estimator_stderr: Optional[float] = None

    def __post_init__(self):
        if len(self.correlators) != 4:
            raise ValidationError("CHSH needs exactly four correlators")
        for e in self.correlators:
            if not -1.0 - CORRELATOR_TOL <= e <= 1.0 + CORRELATOR_TOL:
                raise ValidationError(f"Correlator {e!r} outside [-1, 1]")
        if abs(self.s_value) > 4.0 + 4 * CORRELATOR_TOL:
            raise ValidationError(f"|S| = {abs(self.s_value)} exceeds 4")
        if self.estimator_stderr is not None and not self.estimator_stderr >= 0.0:
            raise ValidationError("estimator_stderr must be nonnegative")

    @property
    def abs_s(self) -> float:
        return abs(self.s_value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "settings": None if self.settings is None else list(self.settings),
            "correlators": list(self.correlators),
            "s_value": self.s_value,
            "abs_s_value": self.abs_s,
            "estimator_stderr": self.estimator_stderr,
        }


def _check_local(model: Any) -> LocalModel:
    if not isinstance(model, LocalModel):
        raise ValidationError(
            f"correlation_eq1 needs a LocalModel, got {type(model).__name__}; use correlation_joint"
        )
    return model


def correlation_eq1(model: LocalModel, a: Union[Setting, float], b: Union[Setting, float],
                    integration: IntegrationSpec = QUADRATURE) -> float:
    """E(a,b) = int dh rho(h) [2p(A=+|a,h) - 1][2p(B=+|b,h) - 1].

    In the deterministic case this is the average of A(a,h)B(b,h).

    Raises:
        DimensionError: for quadrature on hidden_dim > 2
    """
    averages = integrate_model(_check_local(model), [a], [b], integration)
    return float(averages.correlators[0, 0])


def correlation_joint(model: AnyModel, a: Union[Setting, float], b: Union[Setting, float],
                      integration: IntegrationSpec = QUADRATURE) -> float:
    """E(a,b) = sum_AB A*B <p(A,B|a,b,h)>_rho, for any model."""
    averages = integrate_model(as_joint_model(model), [a], [b], integration)
    return float(averages.correlators[0, 0])


def chsh(correlators: Sequence[float], stderrs: Optional[Sequence[float]] = None,
         settings: Optional[Sequence[float]] = None) -> ChshResult:
    """Combine (E(a,b), E(a,b'), E(a',b), E(a',b')) into a ChshResult.

    Standard errors, when given, are propagated in quadrature.
    """
    e = [float(x) for x in correlators]
    if len(e) != 4:
        raise ValidationError(f"CHSH needs four correlators, got {len(e)}")
    s_value = e[0] + e[1] + e[2] - e[3]
    stderr = None
    if stderrs is not None:
        stderr = float(math.sqrt(sum(float(x) ** 2 for x in stderrs)))
    as_tuple = None if settings is None else tuple(float(s) for s in settings)
    return ChshResult(as_tuple, tuple(e), s_value, stderr)


def chsh_from_model(model: AnyModel, settings: Sequence[Union[Setting, float]],
                    integration: IntegrationSpec = QUADRATURE) -> ChshResult:
    """CHSH value of a model at settings (a, a', b, b')."""
    if len(settings) != 4:
        raise ValidationError("chsh_from_model needs settings (a, a', b, b')")
    a, a2, b, b2 = as_settings(settings)
    averages = integrate_model(model, [a, a2], [b, b2], integration)
    e = averages.correlators
    correlators = (e[0, 0], e[0, 1], e[1, 0], e[1, 1])
    stderrs = None if averages.stderr is None else averages.stderr.ravel().tolist()
    return chsh(correlators, stderrs, (a.angle, a2.angle, b.angle, b2.angle))


def chsh_from_behavior(behavior: Behavior, a_indices: Tuple[int, int] = (0, 1),
                       b_indices: Tuple[int, int] = (0, 1)) -> ChshResult:
    """CHSH value read off a behavior at the chosen setting indices."""
    e = behavior.correlators()
    i, i2 = a_indices
    j, j2 = b_indices
    settings = (behavior.settings_a[i].angle, behavior.settings_a[i2].angle,
                behavior.settings_b[j].angle, behavior.settings_b[j2].angle)
    return chsh((e[i, j], e[i, j2], e[i2, j], e[i2, j2]), settings=settings)


def singlet_correlator(a: float, b: float) -> float:
    """The singlet correlator -cos(a - b)."""
    return -math.cos(float(a) - float(b))


def _correlator_matrix_fn(target: ChshTarget, integration: IntegrationSpec
                          ) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if isinstance(target, (LocalModel, JointModel)):
        return lambda angles_a, angles_b: integrate_model(target, angles_a, angles_b, integration).correlators
    if callable(target):
        return lambda angles_a, angles_b: np.array(
            [[float(target(a, b)) for b in angles_b] for a in angles_a])
    raise ValidationError(f"Cannot maximize CHSH over a {type(target).__name__}")


def _chsh_tensor(e_ab: np.ndarray) -> np.ndarray:
    """S over every (i, i', j, j') for a correlator matrix E[i, j]."""
    return (e_ab[:, None, :, None] + e_ab[:, None, None, :]
            + e_ab[None, :, :, None] - e_ab[None, :, None, :])


def _best_index_quadruple(e_ab: np.ndarray) -> Tuple[int, int, int, int]:
    s = _chsh_tensor(e_ab)
    flat = int(np.argmax(np.abs(s)))
    return tuple(int(k) for k in np.unravel_index(flat, s.shape))


def coordinate_descent(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    step: float,
    sweeps: int,
    max_moves: int = 64,
) -> Tuple[np.ndarray, List[float]]:
    """Maximize ``objective`` one coordinate at a time, halving the step after each sweep.

    Returns:
        (best point, best value after each sweep); the values never decrease
    """
    x = np.array(start, dtype=float)
    best = objective(x)
    history = [best]
    for sweep in range(sweeps):
        for coord in range(len(x)):
            for _ in range(max_moves):
                improved = False
                for direction in (1.0, -1.0):
                    trial = x.copy()
                    trial[coord] += direction * step
                    value = objective(trial)
                    if value > best:
                        x, best, improved = trial, value, True
                        break
                if not improved:
                    break
        history.append(best)
        logger.debug(f"CHSH refinement sweep {sweep + 1}: |S| = {best:.12f} (step {step:.3e})")
        step /= 2.0
    return x, history


def maximize_chsh_over_settings(
    target: ChshTarget,
    grid_n: int = 8,
    refine_iters: int = 3,
    integration: IntegrationSpec = QUADRATURE,
) -> Tuple[Tuple[float, float, float, float], ChshResult]:
    """Search settings (a, a', b, b') maximizing |S|.

    A coarse grid of ``grid_n`` angles per setting is scanned exhaustively,
    then refined by coordinate descent starting from the grid spacing.  For a
    fixed Behavior the search runs over its setting indices only.

    Args:
        target: a model, a Behavior, or a correlator function E(a, b)
        grid_n: angles per setting on the coarse grid (>= 8)
        refine_iters: number of refinement sweeps
        integration: how models are averaged over h
    """
    if isinstance(target, Behavior):
        e = target.correlators()
        i, i2, j, j2 = _best_index_quadruple(e)
        result = chsh_from_behavior(target, (i, i2), (j, j2))
        return result.settings, result

    if grid_n < 8:
        raise ValidationError(f"grid_n must be >= 8, got {grid_n}")
    matrix_fn = _correlator_matrix_fn(target, integration)
    angles = np.arange(grid_n) * (TWO_PI / grid_n)
    e = matrix_fn(angles, angles)
    i, i2, j, j2 = _best_index_quadruple(e)
    start = np.array([angles[i], angles[i2], angles[j], angles[j2]])
    logger.debug(f"CHSH grid search ({grid_n}^4 points): best |S| = "
                 f"{abs(_chsh_tensor(e)[i, i2, j, j2]):.12f}")

    def objective(x: np.ndarray) -> float:
        m = matrix_fn(x[:2], x[2:])
        return abs(m[0, 0] + m[0, 1] + m[1, 0] - m[1, 1])

    best_x, _ = coordinate_descent(objective, start, TWO_PI / grid_n, refine_iters)
    settings = tuple(Setting(float(v)).angle for v in best_x)
    if isinstance(target, (LocalModel, JointModel)):
        result = chsh_from_model(target, settings, integration)
    else:
        m = matrix_fn(best_x[:2], best_x[2:])
        result = chsh((m[0, 0], m[0, 1], m[1, 0], m[1, 1]), settings=settings)
    return result.settings, result


# --- empirical estimation ---------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalCorrelator:
    """Sample mean of A*B for one setting pair."""
    value: float
    stderr: float
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "stderr": self.stderr, "n": self.n}


def _events_array(events: Union[np.ndarray, Iterable[Sequence[int]]]) -> np.ndarray:
    arr = np.asarray(list(events) if not isinstance(events, np.ndarray) else events)
    if arr.size == 0:
        return np.zeros((0, 4), dtype=int)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValidationError("Events must be rows of (a_index, b_index, outcome_a, outcome_b)")
    outcomes = arr[:, 2:]
    if not np.all(np.isin(outcomes, (1, -1))):
        raise InvalidOutcomeError("Event outcomes must be +1 or -1")
    return arr.astype(int)


def empirical_correlation(
    events: Union[np.ndarray, Iterable[Sequence[int]]],
    pairs: Optional[Iterable[Tuple[int, int]]] = None,
) -> Dict[Tuple[int, int], EmpiricalCorrelator]:
    """Estimate E per setting pair from (a_index, b_index, A, B) events.

    The standard error is the sample standard deviation of A*B over sqrt(n).

    Args:
        events: event rows
        pairs: setting pairs that must be present; defaults to the observed pairs

    Raises:
        EmptyCellError: listing requested pairs without events
    """
    arr = _events_array(events)
    observed = sorted({(int(a), int(b)) for a, b in arr[:, :2]})
    wanted = sorted(set(pairs)) if pairs is not None else observed
    missing = [p for p in wanted if p not in set(observed)]
    if missing or not wanted:
        raise EmptyCellError(missing)

    products = arr[:, 2] * arr[:, 3]
    results: Dict[Tuple[int, int], EmpiricalCorrelator] = {}
    for a_idx, b_idx in wanted:
        mask = (arr[:, 0] == a_idx) & (arr[:, 1] == b_idx)
        sample = products[mask].astype(float)
        n = int(sample.size)
        std = float(sample.std(ddof=1)) if n > 1 else 0.0
        results[(a_idx, b_idx)] = EmpiricalCorrelator(float(sample.mean()), std / math.sqrt(n), n)
    return results


def simulate_events(model: AnyModel, settings_a: Sequence[Union[Setting, float]],
                    settings_b: Sequence[Union[Setting, float]], n_events: int,
                    seed: int) -> np.ndarray:
    """Draw (a_index, b_index, A, B) events from a model.

    Each event picks a setting pair uniformly, draws h from the source and
    samples the outcome pair from p(A,B|a,b,h).
    """
    if n_events < 1:
        raise ValidationError("simulate_events needs n_events >= 1")
    joint = as_joint_model(model)
    sa, sb = as_settings(settings_a), as_settings(settings_b)
    rng = np.random.default_rng(seed)
    a_idx = rng.integers(0, len(sa), size=n_events)
    b_idx = rng.integers(0, len(sb), size=n_events)
    hidden, _ = joint.source.sample(rng, n_events)
    u = rng.uniform(size=n_events)

    picks = np.empty(n_events, dtype=int)
    for i, a in enumerate(sa):
        for j, b in enumerate(sb):
            mask = (a_idx == i) & (b_idx == j)
            if not mask.any():
                continue
            cdf = np.cumsum(joint.conditional(a, b, hidden[mask]), axis=1)
            picks[mask] = np.minimum((u[mask, None] >= cdf).sum(axis=1), 3)
    pairs = np.array(OUTCOME_PAIRS, dtype=int)[picks]
    return np.column_stack([a_idx, b_idx, pairs])


def read_events_csv(path: Union[str, Path]) -> np.ndarray:
    """Read events from a CSV with header a_index,b_index,outcome_a,outcome_b."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != EVENT_COLUMNS:
            raise ValidationError(f"Event CSV must start with header {','.join(EVENT_COLUMNS)}")
        rows = [[int(cell) for cell in row] for row in reader if row]
    return _events_array(rows)


def write_events_csv(path: Union[str, Path], events: np.ndarray) -> None:
    """Write events with outcomes serialized as +1/-1."""
    arr = _events_array(events)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(EVENT_COLUMNS)
        for a_idx, b_idx, oa, ob in arr:
            writer.writerow([int(a_idx), int(b_idx), f"{int(oa):+d}", f"{int(ob):+d}"])
