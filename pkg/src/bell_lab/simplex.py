"""A small dense simplex routine for linear feasibility problems.

Solves: find x >= 0 with A x = b, by minimizing the sum of artificial
variables (phase one of the two-phase method).  Bland's rule picks both the
entering and the leaving variable, so degenerate problems cannot cycle.

The same code runs on floats (numpy) or on ``fractions.Fraction`` entries for
exact rational arithmetic; in the exact case every tolerance is zero.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, List, Optional, Sequence

import numpy as np

from .errors import SolverError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_PIVOT_TOL = 1e-12
DEFAULT_MAX_ITERATIONS = 500


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    """Outcome of a phase-one solve.

    Attributes:
        feasible: whether the artificial sum reached zero (within tolerance)
        x: the solution for the original variables (meaningful when feasible)
        infeasibility: final sum of artificial variables (L1 residual of A x = b)
        iterations: number of pivots performed
        basis: column index of the basic variable in each row
    """
    feasible: bool
    x: np.ndarray
    infeasibility: Any
    iterations: int
    basis: List[int]


def _to_exact(values: Any) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    return np.vectorize(lambda v: v if isinstance(v, Fraction) else Fraction(v), otypes=[object])(arr)


def solve_feasibility(
    A: Any,
    b: Any,
    exact: bool = False,
    tol: float = DEFAULT_PIVOT_TOL,
    feasibility_tol: float = 1e-9,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FeasibilityResult:
    """Find x >= 0 with A x = b.

    Args:
        A: (m, n) constraint matrix
        b: (m,) right-hand side
        exact: run in Fraction arithmetic (inputs converted with Fraction())
        tol: pivot tolerance (ignored when exact)
        feasibility_tol: largest artificial sum still counted as feasible (ignored when exact)
        max_iterations: pivot limit

    Raises:
        SolverError: if the pivot limit is reached
        ValidationError: for shape mismatches
    """
    if exact:
        A_arr, b_arr = _to_exact(A), _to_exact(b)
        zero, pivot_tol, feas_tol = Fraction(0), Fraction(0), Fraction(0)
    else:
        A_arr, b_arr = np.asarray(A, dtype=float), np.asarray(b, dtype=float)
        zero, pivot_tol, feas_tol = 0.0, tol, feasibility_tol

    if A_arr.ndim != 2 or b_arr.shape != (A_arr.shape[0],):
        raise ValidationError(f"Shape mismatch: A {A_arr.shape}, b {b_arr.shape}")
    m, n = A_arr.shape

    # Flip rows so the artificial basis starts feasible.
    A_arr, b_arr = A_arr.copy(), b_arr.copy()
    for i in range(m):
        if b_arr[i] < zero:
            A_arr[i] = -A_arr[i]
            b_arr[i] = -b_arr[i]

    dtype = object if exact else float
    tableau = np.zeros((m + 1, n + m + 1), dtype=dtype)
    if exact:
        tableau[:] = Fraction(0)
        identity = np.array([[Fraction(int(i == j)) for j in range(m)] for i in range(m)], dtype=object)
    else:
        identity = np.eye(m)
    tableau[:m, :n] = A_arr
    tableau[:m, n:n + m] = identity
    tableau[:m, -1] = b_arr
    # Reduced costs of phase one: minimize the artificial sum.
    tableau[m, :n] = -A_arr.sum(axis=0)
    tableau[m, -1] = -b_arr.sum()

    basis = list(range(n, n + m))
    iterations = 0
    while True:
        entering = next((j for j in range(n + m)
                         if j not in basis and tableau[m, j] < -pivot_tol), None)
        if entering is None:
            break
        if iterations >= max_iterations:
            raise SolverError(f"Simplex did not converge within {max_iterations} pivots")

        leaving_row: Optional[int] = None
        best_ratio = None
        for i in range(m):
            coef = tableau[i, entering]
            if coef > pivot_tol:
                ratio = tableau[i, -1] / coef
                if (best_ratio is None or ratio < best_ratio
                        or (ratio == best_ratio and basis[i] < basis[leaving_row])):
                    best_ratio, leaving_row = ratio, i
        if leaving_row is None:
            # Phase one is bounded below by zero, so this only happens on numerical breakdown.
            raise SolverError("Simplex found an unbounded direction in a bounded problem")

        pivot = tableau[leaving_row, entering]
        tableau[leaving_row] = tableau[leaving_row] / pivot
        for i in range(m + 1):
            if i != leaving_row and tableau[i, entering] != zero:
                tableau[i] = tableau[i] - tableau[i, entering] * tableau[leaving_row]
        basis[leaving_row] = entering
        iterations += 1

    infeasibility = -tableau[m, -1]
    if not exact:
        infeasibility = float(max(infeasibility, 0.0))
    x = np.zeros(n, dtype=dtype)
    if exact:
        x[:] = Fraction(0)
    for i, col in enumerate(basis):
        if col < n:
            x[col] = tableau[i, -1]
    if not exact:
        x = np.clip(x, 0.0, None)

    feasible = infeasibility <= feas_tol
    logger.debug(f"Phase one finished after {iterations} pivots, infeasibility {float(infeasibility):.3e}")
    return FeasibilityResult(bool(feasible), x, infeasibility, iterations, basis)


def convex_combination(vertices: Sequence[Sequence[Any]], target: Sequence[Any],
                       exact: bool = False, **kwargs: Any) -> FeasibilityResult:
    """Find weights w >= 0, sum w = 1, with sum_k w_k vertices[k] = target.

    Args:
        vertices: (k, d) points
        target: (d,) point
        exact: solve in rational arithmetic
    """
    dtype = object if exact else float
    V = np.asarray(vertices, dtype=dtype)
    t = np.asarray(target, dtype=dtype)
    if V.ndim != 2 or t.shape != (V.shape[1],):
        raise ValidationError(f"Shape mismatch: vertices {V.shape}, target {t.shape}")
    ones = np.ones((1, V.shape[0]), dtype=dtype)
    A = np.vstack([V.T, ones])
    b = np.concatenate([t, np.ones(1, dtype=dtype)])
    return solve_feasibility(A, b, exact=exact, **kwargs)
