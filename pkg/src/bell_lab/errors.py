"""Exception hierarchy for bell-lab."""

from typing import Iterable, List, Sequence, Tuple


class BellLabError(Exception):
    """Base class for every error raised by bell-lab."""
    pass


class ValidationError(BellLabError, ValueError):
    """Raised when an input violates a model, behavior or parameter invariant."""
    pass


class InvalidOutcomeError(ValidationError):
    """Raised when a strategy returns something other than +1 or -1."""
    pass


class DimensionError(BellLabError):
    """Raised when quadrature is requested on a hidden space that is too large."""
    pass


class IntegrationError(BellLabError):
    """Raised when an integrated cell is not normalized (signals a broken model)."""
    pass


class EmptyCellError(BellLabError):
    """Raised when a requested setting pair has no events."""

    def __init__(self, missing_pairs: Iterable[Tuple[int, int]]):
        self.missing_pairs: List[Tuple[int, int]] = sorted(missing_pairs)
        if not self.missing_pairs:
            super().__init__("No events to estimate correlators from")
            return
        pairs = ", ".join(f"({a}, {b})" for a, b in self.missing_pairs)
        super().__init__(f"No events for setting pair(s): {pairs}")


class SignalingBehaviorError(BellLabError):
    """Raised when local-polytope membership is requested for a signaling behavior."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"Behavior is signaling (residual {residual:.3e} > tolerance {tolerance:.1e}); "
            "membership is only defined for no-signaling behaviors"
        )


class SolverError(BellLabError):
    """Raised when the feasibility solver fails to converge or contradicts the CHSH test."""
    pass


class UnsupportedFormatError(BellLabError, ValueError):
    """Raised for report formats other than json and csv."""
    pass


class ConfigValidationError(BellLabError):
    """Raised when an experiment config fails validation.

    Attributes:
        problems: (json_pointer, message) pairs, one per violation
    """

    def __init__(self, problems: Sequence[Tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{pointer or '/'}: {message}" for pointer, message in self.problems]
        super().__init__("Invalid config:\n  " + "\n  ".join(lines))

    @property
    def pointers(self) -> List[str]:
        return [pointer for pointer, _ in self.problems]
