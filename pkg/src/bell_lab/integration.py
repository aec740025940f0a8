"""Averaging model conditionals over rho(h): quadrature and seeded Monte Carlo.

Monte Carlo work is split into fixed-size chunks.  Chunk ``k`` draws from the
stream ``SeedSequence(seed).spawn(...)[k]``, which depends only on (seed, k),
and partial sums are combined in ascending chunk order.  The chunk layout is a
function of ``n`` and ``chunk_size`` alone, so a fixed seed gives identical
results for every worker count.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .behavior import OUTCOME_PRODUCTS, Behavior, Setting, as_settings
from .errors import DimensionError, IntegrationError, ValidationError
from .models import AnyModel, HiddenSource, JointModel, LocalModel

logger = logging.getLogger(__name__)

METHODS = ("quadrature", "monte-carlo")
MAX_QUADRATURE_DIM = 2
INTEGRATION_TOL = 1e-9


@dataclass(frozen=True)
class IntegrationSpec:
    """How to average over the hidden-variable distribution."""
    method: str = "quadrature"
    n: int = 4096
    seed: Optional[int] = None
    workers: int = 1
    chunk_size: int = 65536

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"Integration method must be one of {METHODS}, got {self.method!r}")
        if int(self.n) < 1:
            raise ValidationError(f"Integration n must be >= 1, got {self.n}")
        if self.method == "monte-carlo" and self.seed is None:
            raise ValidationError("Monte Carlo integration requires a seed")
        if int(self.workers) < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if int(self.chunk_size) < 1:
            raise ValidationError(f"chunk_size must be >= 1, got {self.chunk_size}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'IntegrationSpec':
        """Create IntegrationSpec from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    def to_dict(self) -> Dict[str, Any]:
        """Convert IntegrationSpec to dictionary."""
        return asdict(self)

    def with_overrides(self, **kwargs: Any) -> 'IntegrationSpec':
        values = self.to_dict()
        values.update({k: v for k, v in kwargs.items() if v is not None})
        return IntegrationSpec(**values)


QUADRATURE = IntegrationSpec()


@dataclass(frozen=True, eq=False)
class ModelAverages:
    """h-averaged cells for a grid of settings.

    Attributes:
        cells: (na, nb, 4) averaged joint probabilities
        correlators: (na, nb) averaged E(a, b)
        stderr: (na, nb) Monte Carlo standard errors of the correlators, None for quadrature
        n_samples: number of hidden samples or quadrature nodes used
    """
    settings_a: Tuple[Setting, ...]
    settings_b: Tuple[Setting, ...]
    cells: np.ndarray
    correlators: np.ndarray
    stderr: Optional[np.ndarray]
    n_samples: int
    method: str

    def behavior(self) -> Behavior:
        return Behavior(self.settings_a, self.settings_b, self.cells)


def seed_streams(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators keyed by (seed, index)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def chunk_sizes(n: int, chunk_size: int) -> List[int]:
    full, rest = divmod(int(n), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])


def hidden_chunks(source: HiddenSource, spec: IntegrationSpec) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Yield (nodes, weights) chunks realizing rho(h) under the given spec.

    Raises:
        DimensionError: for quadrature on hidden_dim > 2
    """
    if spec.method == "quadrature":
        if source.dim > MAX_QUADRATURE_DIM:
            raise DimensionError(
                f"Quadrature supports hidden_dim <= {MAX_QUADRATURE_DIM}, model has {source.dim}; "
                "use monte-carlo"
            )
        nodes, weights = source.quadrature(spec.n)
        for start in range(0, len(nodes), spec.chunk_size):
            yield nodes[start:start + spec.chunk_size], weights[start:start + spec.chunk_size]
        return

    sizes = chunk_sizes(spec.n, spec.chunk_size)
    for rng, size in zip(seed_streams(spec.seed, len(sizes)), sizes):
        yield source.sample(rng, size)


def reduce_chunks(
    source: HiddenSource,
    spec: IntegrationSpec,
    chunk_fn: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, ...]],
) -> Tuple[np.ndarray, ...]:
    """Apply ``chunk_fn`` to every hidden chunk and add the partial sums in chunk order."""
    chunks = list(hidden_chunks(source, spec))
    logger.debug(f"Reducing {len(chunks)} chunk(s) with {spec.workers} worker(s) ({spec.method})")
    if spec.workers > 1 and len(chunks) > 1:
        partials = Parallel(n_jobs=spec.workers, prefer="threads")(
            delayed(chunk_fn)(nodes, weights) for nodes, weights in chunks
        )
    else:
        partials = [chunk_fn(nodes, weights) for nodes, weights in chunks]

    totals = [np.array(part, dtype=float, copy=True) for part in partials[0]]
    for part in partials[1:]:
        for total, value in zip(totals, part):
            total += value
    return tuple(totals)


def _local_chunk(model: LocalModel, angles_a: np.ndarray, angles_b: np.ndarray):
    def chunk(nodes: np.ndarray, weights: np.ndarray):
        pa = np.stack([model.prob_a(a, nodes) for a in angles_a])  # (na, n)
        pb = np.stack([model.prob_b(b, nodes) for b in angles_b])  # (nb, n)
        qa, qb = 1.0 - pa, 1.0 - pb
        cells = np.stack([
            np.einsum('in,jn,n->ij', pa, pb, weights),
            np.einsum('in,jn,n->ij', pa, qb, weights),
            np.einsum('in,jn,n->ij', qa, pb, weights),
            np.einsum('in,jn,n->ij', qa, qb, weights),
        ], axis=-1)
        # integrand (2pA - 1)(2pB - 1), per sample
        ea, eb = 2.0 * pa - 1.0, 2.0 * pb - 1.0
        sum_e = np.einsum('in,jn,n->ij', ea, eb, weights)
        sum_e2 = np.einsum('in,jn,n->ij', ea ** 2, eb ** 2, weights)
        return cells, sum_e, sum_e2, np.array(weights.sum()), np.array((weights ** 2).sum())
    return chunk


def _joint_chunk(model: JointModel, angles_a: np.ndarray, angles_b: np.ndarray):
    na, nb = len(angles_a), len(angles_b)

    def chunk(nodes: np.ndarray, weights: np.ndarray):
        cells = np.empty((na, nb, 4))
        sum_e = np.empty((na, nb))
        sum_e2 = np.empty((na, nb))
        for i, a in enumerate(angles_a):
            for j, b in enumerate(angles_b):
                table = model.conditional(a, b, nodes)  # (n, 4)
                e = table @ OUTCOME_PRODUCTS
                cells[i, j] = weights @ table
                sum_e[i, j] = weights @ e
                sum_e2[i, j] = weights @ (e ** 2)
        return cells, sum_e, sum_e2, np.array(weights.sum()), np.array((weights ** 2).sum())
    return chunk


def integrate_model(
    model: AnyModel,
    settings_a: Sequence[Union[Setting, float]],
    settings_b: Sequence[Union[Setting, float]],
    integration: IntegrationSpec = QUADRATURE,
) -> ModelAverages:
    """Average the model's conditional outcome probabilities over rho(h).

    For a LocalModel the correlators use the factorized integrand
    (2pA - 1)(2pB - 1); for a JointModel they use sum_AB A*B*p(A,B|a,b,h).

    Raises:
        IntegrationError: if any cell misses normalization by more than 1e-9
        DimensionError: for quadrature on hidden_dim > 2
    """
    sa, sb = as_settings(settings_a), as_settings(settings_b)
    if not sa or not sb:
        raise ValidationError("integrate_model needs nonempty setting lists")
    angles_a = np.array([s.angle for s in sa])
    angles_b = np.array([s.angle for s in sb])

    if isinstance(model, LocalModel):
        chunk_fn = _local_chunk(model, angles_a, angles_b)
    else:
        chunk_fn = _joint_chunk(model, angles_a, angles_b)

    cells, sum_e, sum_e2, sum_w, sum_w2 = reduce_chunks(model.source, integration, chunk_fn)
    total_w = float(sum_w)
    if total_w <= 0.0:
        raise IntegrationError("Total sampling weight is zero")

    cells = cells / total_w
    deviation = float(np.max(np.abs(cells.sum(axis=-1) - 1.0)))
    if deviation > INTEGRATION_TOL or np.any(cells < -INTEGRATION_TOL):
        raise IntegrationError(
            f"Integrated cells of model {getattr(model, 'name', '?')!r} are not normalized "
            f"(off by {deviation:.3e})"
        )
    cells = np.clip(cells, 0.0, None)
    cells = cells / cells.sum(axis=-1, keepdims=True)

    correlators = sum_e / total_w
    stderr = None
    n_samples = integration.n
    if integration.method == "monte-carlo":
        variance = np.maximum(sum_e2 / total_w - correlators ** 2, 0.0)
        n_eff = total_w ** 2 / float(sum_w2)
        # Bessel-style correction on the effective sample size
        if n_eff > 1.0:
            variance = variance * n_eff / (n_eff - 1.0)
        stderr = np.sqrt(variance / n_eff)
    else:
        n_samples = len(model.source.quadrature(integration.n)[0])

    return ModelAverages(sa, sb, cells, correlators, stderr, n_samples, integration.method)


def behavior_from_model(
    model: AnyModel,
    settings_a: Sequence[Union[Setting, float]],
    settings_b: Sequence[Union[Setting, float]],
    integration: IntegrationSpec = QUADRATURE,
) -> Behavior:
    """The finite behavior p(A,B|a,b) = <p(A,B|a,b,h)>_rho over the given settings."""
    return integrate_model(model, settings_a, settings_b, integration).behavior()
