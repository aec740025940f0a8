"""Settings, outcomes and finite behaviors p(A,B|a,b)."""

import math
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidOutcomeError, ValidationError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Column order of the four outcome probabilities in every cell.
OUTCOME_PAIRS: Tuple[Tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))
OUTCOME_PRODUCTS = np.array([1.0, -1.0, -1.0, 1.0])

NORMALIZATION_TOL = 1e-12
ANGLE_TOL = 1e-9


def canonical_angle(angle: float) -> float:
    """Map an angle in radians to its representative in [0, 2pi)."""
    reduced = math.fmod(float(angle), TWO_PI)
    if reduced < 0.0:
        reduced += TWO_PI
    if reduced >= TWO_PI:
        # fmod of a tiny negative number can round up to exactly 2pi
        reduced = 0.0
    return reduced


@dataclass(frozen=True)
class Setting:
    """An instrument setting, an angle in radians stored in [0, 2pi)."""
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValidationError(f"Setting angle must be finite, got {self.angle!r}")
        object.__setattr__(self, 'angle', canonical_angle(self.angle))

    @classmethod
    def of(cls, value: Union['Setting', float]) -> 'Setting':
        """Coerce a float (or an existing Setting) into a Setting."""
        if isinstance(value, Setting):
            return value
        return cls(float(value))

    def __float__(self) -> float:
        return self.angle

    def isclose(self, other: 'Setting', tol: float = ANGLE_TOL) -> bool:
        """Compare two settings on the circle."""
        diff = abs(self.angle - Setting.of(other).angle)
        return min(diff, TWO_PI - diff) <= tol


def as_settings(values: Iterable[Union[Setting, float]]) -> Tuple[Setting, ...]:
    return tuple(Setting.of(v) for v in values)


class Outcome(IntEnum):
    """A binary measurement outcome."""
    PLUS = 1
    MINUS = -1

    @classmethod
    def of(cls, value: Any) -> 'Outcome':
        if isinstance(value, str):
            value = {'+': 1, '-': -1, '+1': 1, '-1': -1}.get(value.strip(), value)
        try:
            as_int = int(value)
        except (TypeError, ValueError):
            raise InvalidOutcomeError(f"Outcome must be +1 or -1, got {value!r}")
        if as_int != value or as_int not in (1, -1):
            raise InvalidOutcomeError(f"Outcome must be +1 or -1, got {value!r}")
        return cls(as_int)

    @property
    def symbol(self) -> str:
        return '+' if self is Outcome.PLUS else '-'


def pair_index(outcome_a: int, outcome_b: int) -> int:
    """Column index of (A, B) inside a cell."""
    return OUTCOME_PAIRS.index((int(Outcome.of(outcome_a)), int(Outcome.of(outcome_b))))


def check_probability_table(table: np.ndarray, tol: float = NORMALIZATION_TOL,
                            what: str = "cell") -> None:
    """Validate that the last axis holds four probabilities summing to one.

    Raises:
        ValidationError: if any entry is negative or any row does not sum to 1
    """
    if table.shape[-1] != 4:
        raise ValidationError(f"Each {what} must hold 4 probabilities, got shape {table.shape}")
    if not np.all(np.isfinite(table)):
        raise ValidationError(f"Non-finite probability in {what}")
    if np.any(table < -tol) or np.any(table > 1.0 + tol):
        worst = float(np.max(np.maximum(-table, table - 1.0)))
        raise ValidationError(f"Probability outside [0, 1] in {what} (by {worst:.3e})")
    sums = table.sum(axis=-1)
    deviation = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if deviation > tol:
        raise ValidationError(
            f"Probabilities in a {what} must sum to 1 (off by {deviation:.3e}, tolerance {tol:.0e})"
        )


@dataclass(frozen=True, eq=False)
class Behavior:
    """A table p(A,B | a-index, b-index) over finite setting lists.

    ``table`` has shape (len(settings_a), len(settings_b), 4) with columns in
    ``OUTCOME_PAIRS`` order: (+,+), (+,-), (-,+), (-,-).
    """
    settings_a: Tuple[Setting, ...]
    settings_b: Tuple[Setting, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        settings_a = as_settings(self.settings_a)
        settings_b = as_settings(self.settings_b)
        if not settings_a or not settings_b:
            raise ValidationError("A behavior needs at least one setting per wing")

        table = np.array(self.table, dtype=float)
        expected = (len(settings_a), len(settings_b), 4)
        if table.shape != expected:
            raise ValidationError(f"Behavior table has shape {table.shape}, expected {expected}")
        check_probability_table(table)
        table = np.clip(table, 0.0, 1.0)
        table.setflags(write=False)

        object.__setattr__(self, 'settings_a', settings_a)
        object.__setattr__(self, 'settings_b', settings_b)
        object.__setattr__(self, 'table', table)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.settings_a), len(self.settings_b)

    def cell(self, i: int, j: int) -> np.ndarray:
        return self.table[i, j]

    def probability(self, i: int, j: int, outcome_a: int, outcome_b: int) -> float:
        return float(self.table[i, j, pair_index(outcome_a, outcome_b)])

    def correlator(self, i: int, j: int) -> float:
        """E(a_i, b_j) = sum over (A, B) of A*B*p(A,B|a_i,b_j)."""
        return float(self.table[i, j] @ OUTCOME_PRODUCTS)

    def correlators(self) -> np.ndarray:
        return self.table @ OUTCOME_PRODUCTS

    def marginals_a(self) -> np.ndarray:
        """p(A=+ | a_i, b_j) for every cell, shape (na, nb)."""
        return self.table[..., 0] + self.table[..., 1]

    def marginals_b(self) -> np.ndarray:
        """p(B=+ | a_i, b_j) for every cell, shape (na, nb)."""
        return self.table[..., 0] + self.table[..., 2]

    def restrict(self, a_indices: Sequence[int], b_indices: Sequence[int]) -> 'Behavior':
        """Sub-behavior over the chosen setting indices (in the given order)."""
        sub = self.table[np.ix_(list(a_indices), list(b_indices))]
        return Behavior(
            tuple(self.settings_a[i] for i in a_indices),
            tuple(self.settings_b[j] for j in b_indices),
            sub,
        )

    @classmethod
    def from_correlators(
        cls,
        settings_a: Sequence[Union[Setting, float]],
        settings_b: Sequence[Union[Setting, float]],
        correlators: Any,
        mean_a: Optional[Any] = None,
        mean_b: Optional[Any] = None,
    ) -> 'Behavior':
        """Build cells p(A,B) = (1 + A<A> + B<B> + AB E) / 4.

        Args:
            settings_a: wing-A settings
            settings_b: wing-B settings
            correlators: E per cell, shape (na, nb)
            mean_a: <A> per a-setting (length na), default 0
            mean_b: <B> per b-setting (length nb), default 0
        """
        na, nb = len(settings_a), len(settings_b)
        corr = np.broadcast_to(np.asarray(correlators, dtype=float), (na, nb))
        ma = np.zeros(na) if mean_a is None else np.asarray(mean_a, dtype=float)
        mb = np.zeros(nb) if mean_b is None else np.asarray(mean_b, dtype=float)
        table = np.empty((na, nb, 4))
        for k, (a, b) in enumerate(OUTCOME_PAIRS):
            table[..., k] = 0.25 * (1.0 + a * ma[:, None] + b * mb[None, :] + a * b * corr)
        return cls(tuple(settings_a), tuple(settings_b), table)

    @classmethod
    def mixture(cls, behaviors: Sequence['Behavior'], weights: Sequence[float]) -> 'Behavior':
        """Convex combination of behaviors sharing the same settings."""
        if len(behaviors) != len(weights) or not behaviors:
            raise ValidationError("mixture needs one weight per behavior")
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        table = sum(wk * b.table for wk, b in zip(w, behaviors))
        first = behaviors[0]
        return cls(first.settings_a, first.settings_b, table)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "settings_a": [s.angle for s in self.settings_a],
            "settings_b": [s.angle for s in self.settings_b],
            "cells": self.table.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Behavior':
        try:
            return cls(tuple(data["settings_a"]), tuple(data["settings_b"]), data["cells"])
        except KeyError as e:
            raise ValidationError(f"Behavior JSON is missing field {e.args[0]!r}")


def uniform_behavior(settings_a: Sequence[Union[Setting, float]],
                     settings_b: Sequence[Union[Setting, float]]) -> Behavior:
    """Every cell (1/4, 1/4, 1/4, 1/4)."""
    return Behavior(tuple(settings_a), tuple(settings_b),
                    np.full((len(settings_a), len(settings_b), 4), 0.25))


def pr_box_behavior(settings_a: Sequence[Union[Setting, float]] = (0.0, math.pi / 2),
                    settings_b: Sequence[Union[Setting, float]] = (math.pi / 4, 3 * math.pi / 4)
                    ) -> Behavior:
    """The PR box: A*B = +1 except at (a', b') where A*B = -1, each with probability 1/2."""
    if len(settings_a) != 2 or len(settings_b) != 2:
        raise ValidationError("The PR box is defined on 2x2 settings")
    correlators = np.array([[1.0, 1.0], [1.0, -1.0]])
    return Behavior.from_correlators(settings_a, settings_b, correlators)
