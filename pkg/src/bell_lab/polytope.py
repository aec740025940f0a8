"""The local polytope of the two-party, two-setting, two-outcome scenario.

The polytope is the convex hull of the 16 deterministic behaviors.  Membership
is decided by a linear feasibility problem over convex weights and
cross-checked against the 8 CHSH-form inequalities, which characterize the
no-signaling local set completely in this scenario.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import OUTCOME_PAIRS, Behavior, Setting, as_settings
from .errors import SignalingBehaviorError, SolverError, ValidationError
from .locality import DEFAULT_TOLERANCE, no_signaling_check
from .simplex import convex_combination

logger = logging.getLogger(__name__)

CANONICAL_SETTINGS_A = (0.0, math.pi / 2)
CANONICAL_SETTINGS_B = (math.pi / 4, 3 * math.pi / 4)

LOCAL, NONLOCAL = "local", "nonlocal"

# Correlator positions (i, j) in the order E(a,b), E(a,b'), E(a',b), E(a',b').
CORRELATOR_POSITIONS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _chsh_forms() -> List[Tuple[int, int]]:
    """(position carrying the minus sign, overall sign) for the 8 inequalities."""
    return [(k, sign) for k in range(4) for sign in (1, -1)]


CHSH_FORMS = _chsh_forms()


def describe_form(index: int) -> str:
    k, sign = CHSH_FORMS[index]
    names = ["E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"]
    terms = "-" + names[0] if k == 0 else names[0]
    for i, name in enumerate(names[1:], start=1):
        terms += f" {'-' if i == k else '+'} {name}"
    return terms if sign == 1 else f"-({terms})"


@dataclass(frozen=True, eq=False)
class DeterministicVertex:
    """A deterministic local strategy (A(a), A(a'), B(b), B(b')) and its behavior."""
    assignment: Tuple[int, int, int, int]
    behavior: Behavior

    @property
    def chsh_value(self) -> int:
        return assignment_chsh(self.assignment)


def assignment_chsh(assignment: Sequence[int]) -> int:
    """Integer CHSH value A(a)B(b) + A(a)B(b') + A(a')B(b) - A(a')B(b')."""
    a0, a1, b0, b1 = (int(v) for v in assignment)
    return a0 * b0 + a0 * b1 + a1 * b0 - a1 * b1


def vertex_table(assignment: Sequence[int]) -> np.ndarray:
    """(2, 2, 4) indicator table of a deterministic assignment."""
    a0, a1, b0, b1 = assignment
    outs_a, outs_b = (a0, a1), (b0, b1)
    table = np.zeros((2, 2, 4))
    for i, j in CORRELATOR_POSITIONS:
        table[i, j, OUTCOME_PAIRS.index((outs_a[i], outs_b[j]))] = 1.0
    return table


def enumerate_deterministic_vertices(
    settings_a: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_A,
    settings_b: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_B,
) -> List[DeterministicVertex]:
    """All 2^4 = 16 deterministic strategies over two settings per wing."""
    sa, sb = as_settings(settings_a), as_settings(settings_b)
    if len(sa) != 2 or len(sb) != 2:
        raise ValidationError("Vertex enumeration is defined for two settings per wing")
    vertices = []
    for assignment in itertools.product((1, -1), repeat=4):
        vertices.append(DeterministicVertex(assignment, Behavior(sa, sb, vertex_table(assignment))))
    return vertices


def chsh_bounds() -> Tuple[int, int]:
    """(min, max) of S over the deterministic vertices, by integer enumeration."""
    values = [assignment_chsh(a) for a in itertools.product((1, -1), repeat=4)]
    return min(values), max(values)


def local_bound_chsh() -> int:
    """max |S| over the 16 deterministic vertices; exactly 2."""
    return max(abs(assignment_chsh(a)) for a in itertools.product((1, -1), repeat=4))


def chsh_inequalities(behavior: Behavior) -> np.ndarray:
    """The 8 CHSH-form values sign * (sum of the four E - 2 E_k).

    A no-signaling behavior is local iff all 8 are <= 2.
    """
    if behavior.shape != (2, 2):
        raise ValidationError(f"CHSH inequalities need 2x2 settings, got {behavior.shape}")
    e = behavior.correlators()
    return np.array(form_values([e[i, j] for i, j in CORRELATOR_POSITIONS]), dtype=float)


def form_values(correlators: Sequence[Any]) -> List[Any]:
    """The 8 CHSH-form values for (E(a,b), E(a,b'), E(a',b), E(a',b')); works on floats or Fractions."""
    total = sum(correlators)
    return [sign * (total - 2 * correlators[k]) for k, sign in CHSH_FORMS]


def _cells_from_parameters(mean_a: Sequence[Any], mean_b: Sequence[Any],
                           correlators: Sequence[Sequence[Any]]) -> List[Any]:
    """Flattened (2, 2, 4) cells (1 + A<A> + B<B> + AB E) / 4, normalized and no-signaling by construction."""
    cells = []
    for i, j in CORRELATOR_POSITIONS:
        for a, b in OUTCOME_PAIRS:
            cells.append((1 + a * mean_a[i] + b * mean_b[j] + a * b * correlators[i][j]) / 4)
    return cells


def _parameters(behavior: Behavior) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Setting-wise means <A>, <B> (averaged over the remote setting) and the correlators."""
    mean_a = 2.0 * behavior.marginals_a().mean(axis=1) - 1.0
    mean_b = 2.0 * behavior.marginals_b().mean(axis=0) - 1.0
    return mean_a, mean_b, behavior.correlators()


def rational_cells(behavior: Behavior, max_denominator: int = 10 ** 6) -> List[Fraction]:
    """Cells rebuilt from rational approximations of the marginals and correlators.

    Rounding the independent parameters rather than the cells keeps every
    setting pair summing to exactly 1 and the marginals exactly no-signaling.

    Raises:
        ValidationError: if a rebuilt cell is negative at this denominator bound
    """
    def rational(x: float) -> Fraction:
        return Fraction(float(x)).limit_denominator(max_denominator)

    mean_a, mean_b, e = _parameters(behavior)
    cells = _cells_from_parameters([rational(m) for m in mean_a], [rational(m) for m in mean_b],
                                   [[rational(x) for x in row] for row in e])
    if min(cells) < 0:
        raise ValidationError(
            f"Behavior has no nonnegative rational form with denominators <= {max_denominator}; "
            "raise max_denominator or use exact=False"
        )
    return cells


@dataclass(frozen=True, eq=False)
class MembershipVerdict:
    """Whether a behavior lies in the local polytope, with a certificate.

    Attributes:
        status: "local" or "nonlocal"
        weights: 16 convex weights over the vertices (local only)
        violated_inequality: index, form and value of the most violated CHSH form (nonlocal only)
        gap: largest CHSH-form value minus 2 (<= 0 inside the polytope)
        chsh_values: all 8 CHSH-form values
    """
    status: str
    weights: Optional[Tuple[Any, ...]]
    violated_inequality: Optional[Dict[str, Any]]
    gap: float
    chsh_values: Tuple[float, ...]

    @property
    def is_local(self) -> bool:
        return self.status == LOCAL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "weights": None if self.weights is None else [float(w) for w in self.weights],
            "violated_inequality": self.violated_inequality,
            "gap": self.gap,
            "chsh_values": list(self.chsh_values),
        }


def membership(behavior: Behavior, tol: float = DEFAULT_TOLERANCE, exact: bool = False,
               max_denominator: int = 10 ** 6) -> MembershipVerdict:
    """Decide local-polytope membership of a 2x2 no-signaling behavior.

    The verdict follows the 8 CHSH forms with ties up to ``tol`` counted as
    local.  The LP supplies the certificate and must agree: for a local
    verdict it is solved on the behavior pulled toward the uniform behavior
    just enough to bring every form to <= 2, and for a nonlocal verdict its
    L1 infeasibility is at least the CHSH excess, which exceeds ``tol``.

    Args:
        behavior: a behavior with two settings per wing
        tol: tolerance for no-signaling, LP feasibility and the CHSH comparison
        exact: solve in rational arithmetic; marginals and correlators are converted
            with Fraction.limit_denominator(max_denominator) and the cells rebuilt from them
        max_denominator: denominator bound for the exact conversion

    Raises:
        SignalingBehaviorError: if the behavior fails the no-signaling check
        SolverError: if the LP verdict contradicts the CHSH verdict or the weights
            do not reconstruct the behavior
    """
    if behavior.shape != (2, 2):
        raise ValidationError(f"membership needs 2x2 settings, got {behavior.shape}")
    signaling = no_signaling_check(behavior, tol)
    if not signaling.passed:
        raise SignalingBehaviorError(signaling.max_residual, tol)

    vertices = enumerate_deterministic_vertices(behavior.settings_a, behavior.settings_b)
    V = np.array([v.behavior.table.ravel() for v in vertices])
    if exact:
        target = rational_cells(behavior, max_denominator)
        vertex_rows = [[Fraction(int(x)) for x in row] for row in V]
        quarter = Fraction(1, 4)
    else:
        # The no-signaling projection; equal to the input up to the signaling residual.
        target = np.array(_cells_from_parameters(*_parameters(behavior)), dtype=float)
        vertex_rows = V
        quarter = 0.25
    correlators = [sum(a * b * target[4 * p + k] for k, (a, b) in enumerate(OUTCOME_PAIRS))
                   for p in range(len(CORRELATOR_POSITIONS))]
    values = form_values(correlators)
    worst = max(range(len(values)), key=lambda k: values[k])
    max_value = values[worst]
    chsh_local = max_value <= 2 + tol

    shrink = 0
    if chsh_local and max_value > 2:
        # Uniform cells give every form 0, so mixing in this share brings the maximum to exactly 2.
        shrink = (max_value - 2) / max_value
    lp_target = [(1 - shrink) * t + shrink * quarter for t in target]
    if exact:
        solve = convex_combination(vertex_rows, lp_target, exact=True)
    else:
        solve = convex_combination(vertex_rows, np.array(lp_target), feasibility_tol=tol)

    if solve.feasible != chsh_local:
        raise SolverError(
            f"LP says {'local' if solve.feasible else 'nonlocal'} (infeasibility "
            f"{float(solve.infeasibility):.3e}) but max CHSH form is {float(max_value):.12f}; "
            "check the tolerance"
        )

    chsh_values = tuple(float(v) for v in values)
    gap = float(max_value) - 2.0
    logger.debug(f"membership: {'local' if chsh_local else 'nonlocal'} after {solve.iterations} pivots")
    if not chsh_local:
        violated = {"index": worst, "form": describe_form(worst), "value": float(max_value)}
        return MembershipVerdict(NONLOCAL, None, violated, gap, chsh_values)

    if not exact:
        weights = np.array([float(w) for w in solve.x])
        error = float(np.max(np.abs(weights @ V - behavior.table.ravel())))
        allowed = max(tol, 1e-9) + float(shrink) + signaling.max_residual
        if error > allowed:
            raise SolverError(f"LP weights reconstruct the behavior only to {error:.3e}")
    return MembershipVerdict(LOCAL, tuple(solve.x.tolist()), None, gap, chsh_values)


def reconstruct(weights: Sequence[float], settings_a: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_A,
                settings_b: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_B) -> Behavior:
    """The behavior sum_k w_k vertex_k."""
    vertices = enumerate_deterministic_vertices(settings_a, settings_b)
    return Behavior.mixture([v.behavior for v in vertices], [float(w) for w in weights])


def random_no_signaling_behavior(
    rng: np.random.Generator,
    settings_a: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_A,
    settings_b: Sequence[Union[Setting, float]] = CANONICAL_SETTINGS_B,
    max_tries: int = 100000,
) -> Behavior:
    """Sample correlators and marginals uniformly in [-1, 1], rejecting invalid cells.

    Cells are p(A,B) = (1 + A<A_i> + B<B_j> + AB E_ij)/4, no-signaling by construction.
    """
    for _ in range(max_tries):
        mean_a = rng.uniform(-1.0, 1.0, size=2)
        mean_b = rng.uniform(-1.0, 1.0, size=2)
        correlators = rng.uniform(-1.0, 1.0, size=(2, 2))
        cells = np.empty((2, 2, 4))
        for k, (a, b) in enumerate(OUTCOME_PAIRS):
            cells[..., k] = 0.25 * (1.0 + a * mean_a[:, None] + b * mean_b[None, :] + a * b * correlators)
        if np.all(cells >= 0.0):
            return Behavior(as_settings(settings_a), as_settings(settings_b), cells)
    raise SolverError(f"No valid no-signaling behavior found in {max_tries} draws")
