"""Hidden-variable model abstractions and the built-in models.

Two model classes are provided:

* :class:`LocalModel` -- a source distribution rho(h) plus one response
  function per wing, p(A=+|a,h) and p(B=+|b,h).  Every such model has the
  factorized form P(a,b) = int dh rho(h) (A|a,h)(B|b,h).
* :class:`JointModel` -- a source distribution plus a joint conditional
  p(A,B|a,b,h) that need not factorize.

Response and joint-conditional callables are vectorized over hidden samples:
they receive a setting angle (float, radians) and an array ``h`` of shape
(n, hidden_dim) and return an array with one row per sample.
"""

import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import (
    OUTCOME_PAIRS,
    TWO_PI,
    Behavior,
    Outcome,
    Setting,
    as_settings,
    check_probability_table,
)
from .errors import InvalidOutcomeError, ValidationError

logger = logging.getLogger(__name__)

Response = Callable[[float, np.ndarray], np.ndarray]
Strategy = Callable[[float, np.ndarray], np.ndarray]
JointConditional = Callable[[float, float, np.ndarray], np.ndarray]

JOINT_TOL = 1e-12


@dataclass(frozen=True)
class HiddenSample:
    """One realization of the hidden parameters h with its sampling weight."""
    values: Tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))
        if not self.weight >= 0.0:
            raise ValidationError(f"Sample weight must be nonnegative, got {self.weight!r}")

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        """The sample as a (1, dim) array, the shape response functions expect."""
        return np.asarray(self.values, dtype=float).reshape(1, -1)


class HiddenSource(ABC):
    """The source distribution rho(h).

    Calling a source with a ``numpy.random.Generator`` draws one
    :class:`HiddenSample`; the vectorized methods serve the integrators and
    the locality grids.
    """

    dim: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Draw n samples; returns (values of shape (n, dim), weights of shape (n,))."""

    @abstractmethod
    def quadrature(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Deterministic nodes and normalized weights approximating rho."""

    @abstractmethod
    def grid(self, n: int) -> np.ndarray:
        """Deterministic evaluation points for fixed-h checks, shape (m, dim)."""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """JSON-friendly description used in reports."""

    def __call__(self, rng: np.random.Generator) -> HiddenSample:
        values, weights = self.sample(rng, 1)
        return HiddenSample(tuple(values[0]), float(weights[0]))


class UniformAngleSource(HiddenSource):
    """Independent angles, each uniform on [0, 2pi)."""

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValidationError(f"hidden_dim must be positive, got {dim}")
        self.dim = dim

    def sample(self, rng, n):
        return rng.uniform(0.0, TWO_PI, size=(n, self.dim)), np.ones(n)

    def quadrature(self, n):
        # Composite midpoint rule; tensor product when dim > 1.
        per_axis = max(1, int(round(n ** (1.0 / self.dim))))
        axis = (np.arange(per_axis) + 0.5) * (TWO_PI / per_axis)
        mesh = np.meshgrid(*([axis] * self.dim), indexing='ij')
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        return nodes, np.full(len(nodes), 1.0 / len(nodes))

    def grid(self, n):
        per_axis = max(1, int(round(n ** (1.0 / self.dim))))
        axis = np.arange(per_axis) * (TWO_PI / per_axis)
        mesh = np.meshgrid(*([axis] * self.dim), indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def describe(self):
        return {"kind": "uniform-angle", "dim": self.dim}


class DiscreteSource(HiddenSource):
    """A finite distribution over hidden points."""

    def __init__(self, points: Sequence[Sequence[float]], probabilities: Optional[Sequence[float]] = None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValidationError("A discrete source needs at least one point")
        if probabilities is None:
            probs = np.full(len(pts), 1.0 / len(pts))
        else:
            probs = np.asarray(probabilities, dtype=float)
        if probs.shape != (len(pts),) or np.any(probs < 0) or abs(probs.sum() - 1.0) > JOINT_TOL:
            raise ValidationError("Discrete source probabilities must be nonnegative and sum to 1")
        self.points = pts
        self.probabilities = probs
        self.dim = pts.shape[1]

    def sample(self, rng, n):
        idx = rng.choice(len(self.points), size=n, p=self.probabilities)
        return self.points[idx], np.ones(n)

    def quadrature(self, n):
        # Exhaustive: exact for a finite distribution regardless of n.
        return self.points, self.probabilities

    def grid(self, n):
        return self.points

    def describe(self):
        return {"kind": "discrete", "dim": self.dim, "points": self.points.tolist(),
                "probabilities": self.probabilities.tolist()}


class PointSource(DiscreteSource):
    """A single, fixed hidden point (no hidden randomness at all)."""

    def __init__(self, values: Sequence[float] = (0.0,)):
        super().__init__([list(values)])

    def describe(self):
        return {"kind": "point", "dim": self.dim, "values": self.points[0].tolist()}


def _as_hidden_array(h: Union[HiddenSample, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(h, HiddenSample):
        return h.as_array()
    return np.atleast_2d(np.asarray(h, dtype=float))


def _check_response(probs: np.ndarray, deterministic: bool, wing: str) -> np.ndarray:
    if np.any(probs < -JOINT_TOL) or np.any(probs > 1.0 + JOINT_TOL) or not np.all(np.isfinite(probs)):
        raise ValidationError(f"Response at wing {wing} returned a probability outside [0, 1]")
    if deterministic and not np.all((probs == 0.0) | (probs == 1.0)):
        raise ValidationError(f"Deterministic response at wing {wing} returned a non 0/1 probability")
    return np.clip(probs, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class LocalModel:
    """rho(h) plus local responses p(A=+|a,h) and p(B=+|b,h)."""
    source: HiddenSource
    response_a: Response
    response_b: Response
    deterministic: bool = False
    name: str = "local"
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def hidden_dim(self) -> int:
        return self.source.dim

    @property
    def source_sampler(self) -> HiddenSource:
        return self.source

    def prob_a(self, setting: Union[Setting, float], h) -> np.ndarray:
        """p(A=+ | a, h) for each row of h."""
        angle = Setting.of(setting).angle
        probs = np.asarray(self.response_a(angle, _as_hidden_array(h)), dtype=float)
        return _check_response(probs, self.deterministic, "A")

    def prob_b(self, setting: Union[Setting, float], h) -> np.ndarray:
        """p(B=+ | b, h) for each row of h."""
        angle = Setting.of(setting).angle
        probs = np.asarray(self.response_b(angle, _as_hidden_array(h)), dtype=float)
        return _check_response(probs, self.deterministic, "B")

    def as_joint(self) -> 'JointModel':
        """Embed as a JointModel whose conditional is the product of the responses."""
        def product(angle_a: float, angle_b: float, h: np.ndarray) -> np.ndarray:
            pa = self.prob_a(angle_a, h)
            pb = self.prob_b(angle_b, h)
            return product_table(pa, pb)

        return JointModel(
            source=self.source,
            joint_conditional=product,
            name=self.name,
            params=dict(self.params),
            local=self,
        )

    def describe(self) -> Dict[str, Any]:
        return {"type": self.name, **self.params, "hidden": self.source.describe(),
                "deterministic": self.deterministic}


def product_table(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """(n, 4) table of pA*pB products in OUTCOME_PAIRS order."""
    qa, qb = 1.0 - pa, 1.0 - pb
    return np.stack([pa * pb, pa * qb, qa * pb, qa * qb], axis=-1)


@dataclass(frozen=True, eq=False)
class JointModel:
    """rho(h) plus a joint conditional p(A,B|a,b,h) that need not factorize."""
    source: HiddenSource
    joint_conditional: JointConditional
    name: str = "joint"
    params: Dict[str, Any] = field(default_factory=dict)
    local: Optional[LocalModel] = None

    @property
    def hidden_dim(self) -> int:
        return self.source.dim

    @property
    def source_sampler(self) -> HiddenSource:
        return self.source

    def conditional(self, setting_a: Union[Setting, float], setting_b: Union[Setting, float],
                    h) -> np.ndarray:
        """Validated (n, 4) table p(A,B|a,b,h), columns in OUTCOME_PAIRS order."""
        angle_a = Setting.of(setting_a).angle
        angle_b = Setting.of(setting_b).angle
        hidden = _as_hidden_array(h)
        table = np.asarray(self.joint_conditional(angle_a, angle_b, hidden), dtype=float)
        table = np.broadcast_to(table, (len(hidden), 4))
        check_probability_table(table, JOINT_TOL, what=f"joint conditional of model {self.name!r}")
        return np.clip(table, 0.0, 1.0)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.name, **self.params, "hidden": self.source.describe()}


AnyModel = Union[LocalModel, JointModel]


def as_joint_model(model: AnyModel) -> JointModel:
    return model.as_joint() if isinstance(model, LocalModel) else model


# --- deterministic and stochastic local models --------------------------------

def _outcomes_to_probability(values: Any, wing: str) -> np.ndarray:
    arr = np.asarray(values)
    if not np.all(np.isin(arr, (1, -1))):
        bad = arr[~np.isin(arr, (1, -1))].ravel()[:3]
        raise InvalidOutcomeError(f"Strategy at wing {wing} returned {bad.tolist()}, expected +1 or -1")
    return (arr.astype(float) + 1.0) / 2.0


def deterministic_lhv(strategy_a: Strategy, strategy_b: Strategy, source: HiddenSource,
                      name: str = "deterministic", params: Optional[Dict[str, Any]] = None,
                      check_settings: int = 8) -> LocalModel:
    """Build a deterministic local model from outcome strategies A(a,h), B(b,h).

    Args:
        strategy_a: (angle, h array) -> array of +1/-1 outcomes at wing A
        strategy_b: same for wing B
        source: the hidden-variable distribution
        name: model type name used in reports
        params: descriptor parameters echoed in reports
        check_settings: number of settings tried eagerly to reject bad strategies

    Raises:
        InvalidOutcomeError: if a strategy returns a value outside {+1, -1}
    """
    def response_a(angle: float, h: np.ndarray) -> np.ndarray:
        return _outcomes_to_probability(strategy_a(angle, h), "A")

    def response_b(angle: float, h: np.ndarray) -> np.ndarray:
        return _outcomes_to_probability(strategy_b(angle, h), "B")

    # Probe eagerly so a bad strategy fails at construction, not mid-integration.
    check_h = source.grid(8)
    for angle in np.arange(check_settings) * (TWO_PI / check_settings):
        response_a(float(angle), check_h)
        response_b(float(angle), check_h)

    return LocalModel(source, response_a, response_b, deterministic=True, name=name,
                      params=dict(params or {}))


def sign_strategy(sign: int = 1) -> Strategy:
    """Outcome sign * sign(cos(angle - h0)), with sign(0) taken as +1."""
    sign = int(Outcome.of(sign))

    def strategy(angle: float, h: np.ndarray) -> np.ndarray:
        return sign * np.where(np.cos(angle - h[:, 0]) >= 0.0, 1, -1)

    return strategy


def sign_model(sign_b: int = -1) -> LocalModel:
    """A(a,h) = sign(cos(a-h)), B(b,h) = sign_b * sign(cos(b-h)), h uniform on [0, 2pi).

    With sign_b = -1 the correlator is E(a,b) = -1 + 2|a-b|/pi for |a-b| <= pi.
    """
    return deterministic_lhv(sign_strategy(1), sign_strategy(sign_b), UniformAngleSource(1),
                             name="deterministic-sign", params={"sign_b": int(sign_b)})


def constant_model(outcome_a: int = 1, outcome_b: int = 1) -> LocalModel:
    """Both wings always answer the given outcomes."""
    a, b = int(Outcome.of(outcome_a)), int(Outcome.of(outcome_b))
    return deterministic_lhv(lambda angle, h: np.full(len(h), a),
                             lambda angle, h: np.full(len(h), b),
                             PointSource((0.0,)), name="constant",
                             params={"outcome_a": a, "outcome_b": b})


def stochastic_cosine_model(visibility: float = 1.0) -> LocalModel:
    """p(A=+|a,h) = (1 + v cos(a-h))/2, p(B=+|b,h) = (1 - v cos(b-h))/2.

    The correlator is E(a,b) = -(v^2/2) cos(a-b), never enough to violate CHSH.
    """
    v = float(visibility)
    if not 0.0 <= v <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {visibility!r}")
    return LocalModel(
        UniformAngleSource(1),
        lambda angle, h: 0.5 * (1.0 + v * np.cos(angle - h[:, 0])),
        lambda angle, h: 0.5 * (1.0 - v * np.cos(angle - h[:, 0])),
        deterministic=False,
        name="stochastic-cosine",
        params={"visibility": v},
    )


def random_local_model(seed: int, terms: int = 3) -> LocalModel:
    """A reproducible random local model over a single hidden angle.

    Each wing's response is a convex mixture of ``terms`` components, each either
    a deterministic threshold sign(cos(k*a + m*h + phase) - c) or a stochastic
    cosine (1 + v cos(k*a + m*h + phase))/2, with random integer frequencies.
    """
    if terms < 1:
        raise ValidationError("random_local_model needs at least one term")
    rng = np.random.default_rng(seed)

    def draw_wing():
        components = []
        for _ in range(terms):
            components.append({
                "deterministic": bool(rng.integers(0, 2)),
                "k": int(rng.integers(1, 3)),
                "m": int(rng.integers(1, 4)) * int(rng.choice([-1, 1])),
                "phase": float(rng.uniform(0.0, TWO_PI)),
                "level": float(rng.uniform(-0.5, 0.5)),
                "visibility": float(rng.uniform(0.0, 1.0)),
            })
        weights = rng.dirichlet(np.ones(terms))
        return components, weights

    def make_response(components, weights) -> Response:
        def response(angle: float, h: np.ndarray) -> np.ndarray:
            total = np.zeros(len(h))
            for c, w in zip(components, weights):
                arg = c["k"] * angle + c["m"] * h[:, 0] + c["phase"]
                if c["deterministic"]:
                    total += w * (np.cos(arg) >= c["level"])
                else:
                    total += w * 0.5 * (1.0 + c["visibility"] * np.cos(arg))
            return total
        return response

    comp_a, w_a = draw_wing()
    comp_b, w_b = draw_wing()
    deterministic = all(c["deterministic"] for c in comp_a + comp_b) and terms == 1
    return LocalModel(UniformAngleSource(1), make_response(comp_a, w_a), make_response(comp_b, w_b),
                      deterministic=deterministic, name="random-local",
                      params={"seed": int(seed), "terms": int(terms)})


# --- quantum singlet reference --------------------------------------------------

def _singlet_table(angle_a: float, angle_b: float) -> np.ndarray:
    c = math.cos(angle_a - angle_b)
    return np.array([0.25 * (1.0 - a * b * c) for a, b in OUTCOME_PAIRS])


def singlet_reference_behavior(settings_a: Sequence[Union[Setting, float]],
                               settings_b: Sequence[Union[Setting, float]]) -> Behavior:
    """The singlet prediction p(A,B) = (1 - AB cos(theta_a - theta_b))/4 on every cell."""
    sa, sb = as_settings(settings_a), as_settings(settings_b)
    if not sa or not sb:
        raise ValidationError("singlet_reference_behavior needs nonempty setting lists")
    table = np.array([[_singlet_table(a.angle, b.angle) for b in sb] for a in sa])
    return Behavior(sa, sb, table)


def singlet_joint_model() -> JointModel:
    """The singlet table as a JointModel over a one-point hidden space."""
    def joint(angle_a: float, angle_b: float, h: np.ndarray) -> np.ndarray:
        return np.tile(_singlet_table(angle_a, angle_b), (len(h), 1))

    return JointModel(PointSource((0.0,)), joint, name="singlet-reference")


def signaling_joint_model() -> JointModel:
    """A deliberately signaling model: A = + exactly when b lies in [0, pi).

    B is a fair coin independent of everything, so the wing-A marginal jumps
    between 1 and 0 as the remote setting b changes.
    """
    def joint(angle_a: float, angle_b: float, h: np.ndarray) -> np.ndarray:
        pa = np.full(len(h), 1.0 if angle_b < math.pi else 0.0)
        return product_table(pa, np.full(len(h), 0.5))

    return JointModel(PointSource((0.0,)), joint, name="signaling-example")


# --- Unnikrishnan phase model ---------------------------------------------------

@dataclass(frozen=True)
class UnnikrishnanParams:
    """Spin parameter s and the source-fixed phase difference phi1 - phi2."""
    s: float = 0.5
    delta_phi: float = math.pi

    def __post_init__(self):
        if not (isinstance(self.s, (int, float)) and math.isfinite(self.s) and self.s > 0):
            raise ValidationError(f"s must be a positive real number, got {self.s!r}")
        if not math.isfinite(self.delta_phi):
            raise ValidationError(f"delta_phi must be finite, got {self.delta_phi!r}")

    def sample_phases(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """phi1 uniform on [0, 2pi) and phi2 = phi1 - delta_phi."""
        phi1 = rng.uniform(0.0, TWO_PI, size=n)
        return phi1, phi1 - self.delta_phi

    @property
    def phase_sampler(self) -> Callable[[np.random.Generator, int], Tuple[np.ndarray, np.ndarray]]:
        return self.sample_phases


def _raw_angle(q: Union[Setting, float]) -> float:
    """The angle as given; only Setting instances arrive already reduced to [0, 2pi)."""
    if isinstance(q, Setting):
        return q.angle
    angle = float(q)
    if not math.isfinite(angle):
        raise ValidationError(f"Setting angle must be finite, got {angle!r}")
    return angle


def _check_s(s: float) -> float:
    if not (math.isfinite(s) and s > 0):
        raise ValidationError(f"s must be positive, got {s!r}")
    return float(s)


def unnikrishnan_amplitude(q: Union[Setting, float], phi: Any, s: float, outcome: int = 1) -> np.ndarray:
    """C_{j,A} = exp(i s A (q_j + phi_j))."""
    a = int(Outcome.of(outcome))
    return np.exp(1j * _check_s(s) * a * (_raw_angle(q) + np.asarray(phi, dtype=float)))


def unnikrishnan_amplitude_correlation(q1: Union[Setting, float], q2: Union[Setting, float],
                                       phi1: float, phi2: float, s: float) -> float:
    """U = Re(N C_{1+} C_{2+}^*) with N = 1, i.e. cos(s(q1-q2) + s(phi1-phi2))."""
    c1 = unnikrishnan_amplitude(q1, phi1, s, 1)
    c2 = unnikrishnan_amplitude(q2, phi2, s, 1)
    return float(np.real(c1 * np.conj(c2)))


def unnikrishnan_table(q1: float, q2: float, phi1: np.ndarray, phi2: np.ndarray, s: float) -> np.ndarray:
    """(n, 4) table (1 + AB cos(2s(q1-q2) + 2s(phi1-phi2)))/4."""
    c = np.cos(2.0 * s * (q1 - q2) + 2.0 * s * (np.asarray(phi1) - np.asarray(phi2)))
    return np.stack([0.25 * (1.0 + a * b * c) for a, b in OUTCOME_PAIRS], axis=-1)


def unnikrishnan_joint_probability(q1: Union[Setting, float], q2: Union[Setting, float],
                                   phi1: float, phi2: float, s: float,
                                   outcome_a: int, outcome_b: int) -> float:
    """P(A,B | q1, q2, phi1, phi2) of the phase-correlation model.

    For A*B = +1 this is cos^2[s(q1-q2) + s(phi1-phi2)]/2, for A*B = -1 the
    matching sin^2/2; the four outcomes sum to one.
    """
    s = _check_s(s)
    a, b = int(Outcome.of(outcome_a)), int(Outcome.of(outcome_b))
    x = 2.0 * s * (_raw_angle(q1) - _raw_angle(q2)) + 2.0 * s * (float(phi1) - float(phi2))
    return 0.25 * (1.0 + a * b * math.cos(x))


def unnikrishnan_model(params: UnnikrishnanParams) -> JointModel:
    """The phase model as a JointModel with h = (phi1,) and phi2 = phi1 - delta_phi.

    With s = 1/2 and delta_phi = pi the correlator is -cos(q1 - q2), the singlet value.
    """
    s, delta = params.s, params.delta_phi

    def joint(angle_a: float, angle_b: float, h: np.ndarray) -> np.ndarray:
        phi1 = h[:, 0]
        return unnikrishnan_table(angle_a, angle_b, phi1, phi1 - delta, s)

    return JointModel(UniformAngleSource(1), joint, name="unnikrishnan",
                      params={"s": s, "delta_phi": delta})


# --- JSON descriptors ------------------------------------------------------------

def _build_unnikrishnan(desc: Dict[str, Any]) -> JointModel:
    return unnikrishnan_model(UnnikrishnanParams(
        s=float(desc.get("s", 0.5)), delta_phi=float(desc.get("delta_phi", math.pi))))


def _build_hbt(desc: Dict[str, Any]) -> JointModel:
    from .hbt import hbt_joint_model
    return hbt_joint_model(threshold=float(desc.get("threshold", 1.0)))


MODEL_BUILDERS: Dict[str, Callable[[Dict[str, Any]], AnyModel]] = {
    "constant": lambda d: constant_model(d.get("outcome_a", 1), d.get("outcome_b", 1)),
    "deterministic-sign": lambda d: sign_model(d.get("sign_b", -1)),
    "stochastic-cosine": lambda d: stochastic_cosine_model(float(d.get("visibility", 1.0))),
    "random-local": lambda d: random_local_model(int(d.get("seed", 0)), int(d.get("terms", 3))),
    "unnikrishnan": _build_unnikrishnan,
    "singlet-reference": lambda d: singlet_joint_model(),
    "signaling-example": lambda d: signaling_joint_model(),
    "hbt": _build_hbt,
}


def model_from_dict(descriptor: Dict[str, Any]) -> AnyModel:
    """Construct a model from its JSON descriptor, e.g. {"type": "unnikrishnan", "s": 0.5}.

    Raises:
        ValidationError: for unknown types or invalid parameters
    """
    if not isinstance(descriptor, dict) or "type" not in descriptor:
        raise ValidationError("Model descriptor must be an object with a 'type' field")
    kind = descriptor["type"]
    builder = MODEL_BUILDERS.get(kind)
    if builder is None:
        known = ", ".join(sorted(MODEL_BUILDERS))
        raise ValidationError(f"Unknown model type {kind!r} (known: {known})")
    try:
        model = builder(descriptor)
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"Invalid parameters for model {kind!r}: {e}")
    logger.debug(f"Built model {kind!r} with hidden_dim={model.hidden_dim}")
    return model
