"""A classical intensity-interferometry (Hanbury Brown-Twiss) simulation.

A single common phase theta, uniform on [0, 2pi), stands in for the whole set
of source parameters.  Detector k sees the deterministic intensity

    I_k = 1 + cos(theta + alpha_k)

so intensities are correlated across the ensemble (common cause) while every
fixed-theta conditional factorizes.  Thresholding I at ``threshold`` gives
binary outcomes, and the resulting behaviors are mixtures of deterministic
local strategies.
"""

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import OUTCOME_PAIRS, TWO_PI, Behavior, Setting, as_settings
from .errors import ValidationError
from .integration import IntegrationSpec, hidden_chunks, reduce_chunks
from .locality import DEFAULT_TOLERANCE, LocalityGrid, LocalityReport, check_condition_c
from .metrics import ChshResult, chsh_from_behavior
from .models import JointModel, UniformAngleSource, deterministic_lhv
from .polytope import CANONICAL_SETTINGS_A, CANONICAL_SETTINGS_B, MembershipVerdict, membership

logger = logging.getLogger(__name__)

HBT_EVENT_COLUMNS = ("theta", "i1", "i2", "a", "b")
DEFAULT_FIXED_H_POINTS = 16
DEFAULT_FIXED_H_REPEATS = 64


def hbt_intensity(theta: Any, alpha: Any) -> Any:
    """I = 1 + cos(theta + alpha), in [0, 2]."""
    return 1.0 + np.cos(np.asarray(theta, dtype=float) + np.asarray(alpha, dtype=float))


def hbt_outcome(theta: Any, alpha: Any, threshold: float = 1.0) -> np.ndarray:
    """+1 where the intensity reaches the threshold, -1 otherwise."""
    return np.where(hbt_intensity(theta, alpha) >= threshold, 1, -1)


def hbt_joint_model(threshold: float = 1.0) -> JointModel:
    """The thresholded intensities as a deterministic model; settings are the phases alpha."""
    threshold = float(threshold)

    def strategy(angle: float, h: np.ndarray) -> np.ndarray:
        return hbt_outcome(h[:, 0], angle, threshold)

    local = deterministic_lhv(strategy, strategy, UniformAngleSource(1), name="hbt",
                              params={"threshold": threshold})
    return local.as_joint()


@dataclass(frozen=True)
class HbtConfig:
    """Parameters of one HBT run.

    Attributes:
        alpha1: phase of detector 1 for the intensity covariance
        alpha2: phase of detector 2 for the intensity covariance
        n_events: number of simulated events (common phases)
        seed: root seed of the chunked random streams
        threshold: intensity cut for binary outcomes
        settings_a: detector-1 phases of the binary behavior
        settings_b: detector-2 phases of the binary behavior
        workers: joblib worker count; results do not depend on it
        chunk_size: events per random stream
        fixed_h_points: number of fixed phases used for the conditional covariance
        fixed_h_repeats: events repeated at each fixed phase
    """
    alpha1: float = 0.0
    alpha2: float = 0.0
    n_events: int = 100000
    seed: int = 0
    threshold: float = 1.0
    settings_a: Tuple[float, ...] = CANONICAL_SETTINGS_A
    settings_b: Tuple[float, ...] = CANONICAL_SETTINGS_B
    workers: int = 1
    chunk_size: int = 65536
    fixed_h_points: int = DEFAULT_FIXED_H_POINTS
    fixed_h_repeats: int = DEFAULT_FIXED_H_REPEATS

    def __post_init__(self):
        object.__setattr__(self, 'settings_a', tuple(float(a) for a in self.settings_a))
        object.__setattr__(self, 'settings_b', tuple(float(b) for b in self.settings_b))
        if int(self.n_events) < 1:
            raise ValidationError(f"n_events must be >= 1, got {self.n_events}")
        if not self.settings_a or not self.settings_b:
            raise ValidationError("HBT settings lists must be nonempty")
        if int(self.fixed_h_points) < 1 or int(self.fixed_h_repeats) < 2:
            raise ValidationError("fixed_h_points must be >= 1 and fixed_h_repeats >= 2")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HbtConfig':
        """Create HbtConfig from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    def to_dict(self) -> Dict[str, Any]:
        """Convert HbtConfig to dictionary."""
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "n_events": self.n_events,
            "seed": self.seed,
            "threshold": self.threshold,
            "settings_a": list(self.settings_a),
            "settings_b": list(self.settings_b),
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "fixed_h_points": self.fixed_h_points,
            "fixed_h_repeats": self.fixed_h_repeats,
        }

    def integration(self) -> IntegrationSpec:
        """The Monte Carlo spec driving the common-phase streams."""
        return IntegrationSpec(method="monte-carlo", n=int(self.n_events), seed=int(self.seed),
                               workers=int(self.workers), chunk_size=int(self.chunk_size))


@dataclass(frozen=True, eq=False)
class HbtReport:
    """Ensemble and fixed-phase statistics of one run."""
    config: HbtConfig
    mean_intensity_1: float
    mean_intensity_2: float
    ensemble_covariance: float
    ensemble_stderr: float
    analytic_covariance: float
    fixed_h_covariance: float
    fixed_h_outcome_residual: float
    binary_behavior: Behavior
    chsh_of_binary: ChshResult

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": {k: v for k, v in self.config.to_dict().items() if k != "workers"},
            "mean_intensity_1": self.mean_intensity_1,
            "mean_intensity_2": self.mean_intensity_2,
            "ensemble_covariance": self.ensemble_covariance,
            "ensemble_stderr": self.ensemble_stderr,
            "analytic_covariance": self.analytic_covariance,
            "fixed_h_covariance": self.fixed_h_covariance,
            "fixed_h_outcome_residual": self.fixed_h_outcome_residual,
            "binary_behavior": self.binary_behavior.to_dict(),
            "chsh_of_binary": self.chsh_of_binary.to_dict(),
        }


def _intensity_moments(config: HbtConfig) -> Tuple[float, float, float, float]:
    """Two passes over the same streams: means, then centered products."""
    spec = config.integration()
    source = UniformAngleSource(1)

    def first(nodes: np.ndarray, weights: np.ndarray):
        i1 = hbt_intensity(nodes[:, 0], config.alpha1)
        i2 = hbt_intensity(nodes[:, 0], config.alpha2)
        return np.array(i1.sum()), np.array(i2.sum())

    s1, s2 = reduce_chunks(source, spec, first)
    n = float(config.n_events)
    m1, m2 = float(s1) / n, float(s2) / n

    def second(nodes: np.ndarray, weights: np.ndarray):
        d = (hbt_intensity(nodes[:, 0], config.alpha1) - m1) * (hbt_intensity(nodes[:, 0], config.alpha2) - m2)
        return np.array(d.sum()), np.array((d ** 2).sum())

    sd, sd2 = reduce_chunks(source, spec, second)
    covariance = float(sd) / n
    if config.n_events > 1:
        variance = max((float(sd2) - n * covariance ** 2) / (n - 1.0), 0.0)
        stderr = math.sqrt(variance / n)
    else:
        stderr = 0.0
    return m1, m2, covariance, stderr


def _binary_counts(config: HbtConfig) -> np.ndarray:
    """Integer outcome-pair counts, shape (na, nb, 4), every pair from the same phases."""
    alphas_a = np.array(config.settings_a)
    alphas_b = np.array(config.settings_b)

    def chunk(nodes: np.ndarray, weights: np.ndarray):
        theta = nodes[:, 0]
        outs_a = hbt_outcome(theta[None, :], alphas_a[:, None], config.threshold)  # (na, n)
        outs_b = hbt_outcome(theta[None, :], alphas_b[:, None], config.threshold)  # (nb, n)
        counts = np.zeros((len(alphas_a), len(alphas_b), 4), dtype=np.int64)
        for k, (a, b) in enumerate(OUTCOME_PAIRS):
            hits_a = (outs_a == a).astype(np.int64)
            hits_b = (outs_b == b).astype(np.int64)
            counts[..., k] = hits_a @ hits_b.T
        return (counts,)

    # Counts stay integral in float64 well past any feasible n_events.
    (counts,) = reduce_chunks(UniformAngleSource(1), config.integration(), chunk)
    return counts


def hbt_events(theta: Any, config: HbtConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Intensities (i1, i2) and outcomes (a, b) of both detectors for each phase."""
    theta = np.asarray(theta, dtype=float)
    return (hbt_intensity(theta, config.alpha1), hbt_intensity(theta, config.alpha2),
            hbt_outcome(theta, config.alpha1, config.threshold),
            hbt_outcome(theta, config.alpha2, config.threshold))


def sample_covariance(x: Any, y: Any) -> float:
    """Population covariance, centered on the first sample so constant sequences give exactly 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
        raise ValidationError(f"Need two equal-length 1-d samples, got shapes {x.shape} and {y.shape}")
    dx, dy = x - x[0], y - y[0]
    return float(np.mean(dx * dy) - np.mean(dx) * np.mean(dy))


def _factorization_residual(table: np.ndarray) -> float:
    """max |p(A,B) - p(A)p(B)| over rows of an (n, 4) joint table."""
    residual = 0.0
    for k, (a, b) in enumerate(OUTCOME_PAIRS):
        p_a = sum(table[:, m] for m, (a2, _) in enumerate(OUTCOME_PAIRS) if a2 == a)
        p_b = sum(table[:, m] for m, (_, b2) in enumerate(OUTCOME_PAIRS) if b2 == b)
        residual = max(residual, float(np.max(np.abs(table[:, k] - p_a * p_b))))
    return residual


def _fixed_phase_residuals(config: HbtConfig) -> Tuple[float, float]:
    """Fixed-phase intensity covariance and outcome factorization residual.

    The covariance is taken over simulated events at each repeated phase of the
    grid; the residual compares the model's fixed-phase joint table with the
    product of its marginals, for the run's detector pair and every behavior setting pair.
    """
    phases = np.arange(config.fixed_h_points) * (TWO_PI / config.fixed_h_points)
    covariance = 0.0
    for theta in phases:
        i1, i2, _, _ = hbt_events(np.full(int(config.fixed_h_repeats), theta), config)
        covariance = max(covariance, abs(sample_covariance(i1, i2)))

    model = hbt_joint_model(config.threshold)
    pairs = [(config.alpha1, config.alpha2)] + list(itertools.product(config.settings_a, config.settings_b))
    residual = 0.0
    for alpha_a, alpha_b in pairs:
        residual = max(residual, _factorization_residual(model.conditional(alpha_a, alpha_b, phases[:, None])))
    return covariance, residual


def hbt_run(config: HbtConfig) -> HbtReport:
    """Simulate the ensemble and collect intensity and binary-outcome statistics.

    The binary behavior is estimated from integer counts over one common phase
    stream, so it is an exact mixture of deterministic strategies and always
    satisfies every CHSH inequality.
    """
    m1, m2, covariance, stderr = _intensity_moments(config)
    counts = _binary_counts(config)
    behavior = Behavior(as_settings(config.settings_a), as_settings(config.settings_b),
                        counts / float(config.n_events))
    fixed_cov, fixed_residual = _fixed_phase_residuals(config)
    if behavior.shape[0] >= 2 and behavior.shape[1] >= 2:
        chsh_result = chsh_from_behavior(behavior)
    else:
        chsh_result = chsh_from_behavior(behavior, (0, 0), (0, 0))
    analytic = 0.5 * math.cos(config.alpha1 - config.alpha2)
    logger.info(f"HBT run: covariance {covariance:.6f} +/- {stderr:.6f} (analytic {analytic:.6f}), "
                f"S of binary outcomes {chsh_result.s_value:.6f}")
    return HbtReport(config, m1, m2, covariance, stderr, analytic, fixed_cov, fixed_residual,
                     behavior, chsh_result)


@dataclass(frozen=True, eq=False)
class HbtAudit:
    """Membership verdicts over every 2x2 sub-behavior plus the fixed-phase factorization check."""
    verdicts: List[Tuple[Tuple[int, int, int, int], MembershipVerdict]]
    condition_c: LocalityReport
    report: HbtReport = field(repr=False)

    @property
    def all_local(self) -> bool:
        return all(verdict.is_local for _, verdict in self.verdicts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "all_local": self.all_local,
            "verdicts": [{"indices": list(idx), **verdict.to_dict()} for idx, verdict in self.verdicts],
            "condition_c": self.condition_c.to_dict(),
            "ensemble_covariance": self.report.ensemble_covariance,
            "ensemble_stderr": self.report.ensemble_stderr,
        }


def hbt_locality_audit(config: HbtConfig,
                       settings_a: Optional[Sequence[Union[Setting, float]]] = None,
                       settings_b: Optional[Sequence[Union[Setting, float]]] = None,
                       tol: float = DEFAULT_TOLERANCE) -> HbtAudit:
    """Classify every 2x2 sub-behavior of the binary outcomes and check fixed-phase factorization.

    Args:
        config: the run parameters
        settings_a: detector-1 phases; defaults to ``config.settings_a``
        settings_b: detector-2 phases; defaults to ``config.settings_b``
        tol: tolerance passed to the membership and Condition C checks
    """
    updates = {}
    if settings_a is not None:
        updates["settings_a"] = tuple(Setting.of(s).angle for s in settings_a)
    if settings_b is not None:
        updates["settings_b"] = tuple(Setting.of(s).angle for s in settings_b)
    if updates:
        config = HbtConfig.from_dict({**config.to_dict(), **updates})
    if len(config.settings_a) < 2 or len(config.settings_b) < 2:
        raise ValidationError("The HBT audit needs at least two settings per detector")

    report = hbt_run(config)
    verdicts = []
    for (i, i2), (j, j2) in itertools.product(itertools.combinations(range(len(config.settings_a)), 2),
                                              itertools.combinations(range(len(config.settings_b)), 2)):
        sub = report.binary_behavior.restrict([i, i2], [j, j2])
        verdicts.append(((i, i2, j, j2), membership(sub, tol)))

    grid = LocalityGrid.of(config.settings_a, config.settings_b)
    condition_c = check_condition_c(hbt_joint_model(config.threshold), grid, tol)
    audit = HbtAudit(verdicts, condition_c, report)
    logger.info(f"HBT audit: {len(verdicts)} sub-behavior(s), all local: {audit.all_local}, "
                f"condition-c residual {condition_c.max_residual:.3e}")
    return audit


def write_hbt_events(path: Union[str, Path], config: HbtConfig, limit: Optional[int] = None) -> int:
    """Dump (theta, i1, i2, a, b) rows of the run's phase stream; returns the row count."""
    written = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(HBT_EVENT_COLUMNS)
        for nodes, _ in hidden_chunks(UniformAngleSource(1), config.integration()):
            theta = nodes[:, 0]
            if limit is not None:
                theta = theta[:max(limit - written, 0)]
            for row in zip(theta, *hbt_events(theta, config)):
                writer.writerow([f"{row[0]:.12g}", f"{row[1]:.12g}", f"{row[2]:.12g}",
                                 f"{int(row[3]):+d}", f"{int(row[4]):+d}"])
            written += len(theta)
            if limit is not None and written >= limit:
                break
    return written
