"""Experiment configuration: dataclasses, validation and override precedence."""

import os
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
from dataclasses import dataclass, asdict, field

from packaging.version import InvalidVersion, Version

from .behavior import Behavior
from .errors import BellLabError, ConfigValidationError
from .hbt import HbtConfig
from .integration import METHODS, IntegrationSpec
from .locality import DEFAULT_HIDDEN_POINTS, DEFAULT_SETTING_POINTS, DEFAULT_TOLERANCE
from .models import MODEL_BUILDERS, model_from_dict
from .version import CONFIG_SCHEMA_VERSION

logger = logging.getLogger(__name__)

EXPERIMENTS = ("correlate", "chsh", "maximize", "check-locality", "polytope-membership", "hbt")
FORMATS = ("json", "csv")
MODEL_EXPERIMENTS = ("correlate", "chsh", "maximize", "check-locality")

ENV_SEED = "BELL_LAB_SEED"
ENV_WORKERS = "BELL_LAB_WORKERS"

TOP_LEVEL_FIELDS = ("schema_version", "experiment", "model", "settings", "integration", "output",
                    "tolerance", "grid", "search", "behavior", "hbt", "exact")


@dataclass
class OutputSpec:
    """Where and how the report is written; no path means stdout."""
    path: Optional[str] = None
    format: str = "json"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'OutputSpec':
        """Create OutputSpec from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    def to_dict(self) -> Dict[str, Any]:
        """Convert OutputSpec to dictionary."""
        return asdict(self)


@dataclass
class GridSpec:
    """Evenly spaced settings and hidden points for the locality checks."""
    n_settings: int = DEFAULT_SETTING_POINTS
    n_hidden: int = DEFAULT_HIDDEN_POINTS

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GridSpec':
        """Create GridSpec from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    def to_dict(self) -> Dict[str, Any]:
        """Convert GridSpec to dictionary."""
        return asdict(self)


@dataclass
class SearchSpec:
    """Coarse grid size and refinement sweeps for CHSH maximization."""
    grid_n: int = 8
    refine_iters: int = 3

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SearchSpec':
        """Create SearchSpec from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    def to_dict(self) -> Dict[str, Any]:
        """Convert SearchSpec to dictionary."""
        return asdict(self)


@dataclass
class ExperimentConfig:
    """A validated experiment description.

    ``settings`` holds ``{"a": [...], "b": [...]}`` lists, or ``{"chsh": [a, a', b, b']}``
    for the chsh experiment.
    """
    experiment: str
    model: Optional[Dict[str, Any]] = None
    settings: Dict[str, List[float]] = field(default_factory=dict)
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    tolerance: float = DEFAULT_TOLERANCE
    grid: Optional[GridSpec] = None
    search: SearchSpec = field(default_factory=SearchSpec)
    behavior: Optional[Dict[str, Any]] = None
    hbt: Optional[HbtConfig] = None
    exact: bool = False
    schema_version: str = CONFIG_SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Create ExperimentConfig from an already validated dictionary."""
        grid = data.get("grid")
        hbt = data.get("hbt")
        if data.get("experiment") == "hbt" and hbt is None:
            hbt = {}
        return cls(
            experiment=data["experiment"],
            model=data.get("model"),
            settings={k: [float(x) for x in v] for k, v in data.get("settings", {}).items()},
            integration=IntegrationSpec.from_dict(data.get("integration", {})),
            output=OutputSpec.from_dict(data.get("output", {})),
            tolerance=float(data.get("tolerance", DEFAULT_TOLERANCE)),
            grid=None if grid is None else GridSpec.from_dict(grid),
            search=SearchSpec.from_dict(data.get("search", {})),
            behavior=data.get("behavior"),
            hbt=None if hbt is None else HbtConfig.from_dict(hbt),
            exact=bool(data.get("exact", False)),
            schema_version=str(data.get("schema_version", CONFIG_SCHEMA_VERSION)),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert ExperimentConfig to dictionary."""
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "model": self.model,
            "settings": self.settings,
            "integration": self.integration.to_dict(),
            "output": self.output.to_dict(),
            "tolerance": self.tolerance,
            "grid": None if self.grid is None else self.grid.to_dict(),
            "search": self.search.to_dict(),
            "behavior": self.behavior,
            "hbt": None if self.hbt is None else self.hbt.to_dict(),
            "exact": self.exact,
        }

    def settings_lists(self) -> Tuple[List[float], List[float]]:
        """(settings_a, settings_b), expanding a chsh quadruple when given."""
        if "chsh" in self.settings:
            a, a2, b, b2 = self.settings["chsh"]
            return [a, a2], [b, b2]
        return list(self.settings.get("a", [])), list(self.settings.get("b", []))

    def chsh_settings(self) -> Tuple[float, float, float, float]:
        a, b = self.settings_lists()
        return a[0], a[1], b[0], b[1]


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class ConfigLoader:
    """Loads experiment configs, applying env and flag overrides before validation.

    Precedence for the seed and the worker count: flag > environment > config file.
    """

    def __init__(self, environ: Optional[Dict[str, str]] = None):
        """Initialize the loader.

        Args:
            environ: environment mapping; defaults to ``os.environ``
        """
        self.environ = os.environ if environ is None else environ

    def load(self, path: Union[str, Path], seed: Optional[int] = None, workers: Optional[int] = None,
             out: Optional[str] = None, fmt: Optional[str] = None) -> ExperimentConfig:
        """Read, override and validate a config file.

        Raises:
            ConfigValidationError: listing every violation as a JSON pointer
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigValidationError([("", f"cannot read config: {e}")])
        except json.JSONDecodeError as e:
            raise ConfigValidationError([("", f"invalid JSON at line {e.lineno}: {e.msg}")])
        return self.load_dict(data, seed=seed, workers=workers, out=out, fmt=fmt)

    def load_dict(self, data: Any, seed: Optional[int] = None, workers: Optional[int] = None,
                  out: Optional[str] = None, fmt: Optional[str] = None) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigValidationError([("", "config must be a JSON object")])
        data = self.apply_overrides(data, seed=seed, workers=workers, out=out, fmt=fmt)
        problems = validate_config(data)
        if problems:
            raise ConfigValidationError(problems)
        config = ExperimentConfig.from_dict(data)
        logger.debug(f"Loaded {config.experiment!r} config (seed={config.integration.seed}, "
                     f"workers={config.integration.workers})")
        return config

    def _env_int(self, key: str) -> Optional[int]:
        raw = self.environ.get(key)
        if raw is None or raw.strip() == "":
            return None
        try:
            return int(raw)
        except ValueError:
            logger.warning(f"Ignoring {key}={raw!r}: not an integer")
            return None

    def apply_overrides(self, data: Dict[str, Any], seed: Optional[int] = None,
                        workers: Optional[int] = None, out: Optional[str] = None,
                        fmt: Optional[str] = None) -> Dict[str, Any]:
        """Return a copy of ``data`` with env and flag overrides merged in."""
        data = json.loads(json.dumps(data))
        seed = seed if seed is not None else self._env_int(ENV_SEED)
        workers = workers if workers is not None else self._env_int(ENV_WORKERS)

        sections = ["integration"]
        if data.get("experiment") == "hbt":
            sections.append("hbt")
        for section in sections:
            if section in data and not isinstance(data[section], dict):
                continue
            target = data.setdefault(section, {})
            if seed is not None:
                target["seed"] = seed
            if workers is not None:
                target["workers"] = workers

        if out is not None or fmt is not None:
            output = data.setdefault("output", {})
            if isinstance(output, dict):
                if out is not None:
                    output["path"] = out
                if fmt is not None:
                    output["format"] = fmt
        return data


def _validate_settings(experiment: str, settings: Any, problems: List[Tuple[str, str]]) -> None:
    if not isinstance(settings, dict):
        problems.append(("/settings", "must be an object"))
        return
    for key, values in settings.items():
        if key not in ("a", "b", "chsh"):
            problems.append((f"/settings/{key}", "unknown settings list (expected a, b or chsh)"))
        elif not isinstance(values, list) or not values:
            problems.append((f"/settings/{key}", "must be a nonempty list of angles"))
        else:
            for i, value in enumerate(values):
                if not _is_number(value):
                    problems.append((f"/settings/{key}/{i}", "must be a number"))

    if experiment == "chsh":
        if "chsh" in settings:
            if isinstance(settings["chsh"], list) and len(settings["chsh"]) != 4:
                problems.append(("/settings/chsh", "must hold exactly four angles (a, a', b, b')"))
        else:
            for key in ("a", "b"):
                if key not in settings:
                    problems.append((f"/settings/{key}", "required for chsh (or give settings/chsh)"))
                elif isinstance(settings[key], list) and len(settings[key]) != 2:
                    problems.append((f"/settings/{key}", "must hold exactly two angles"))
    elif experiment == "correlate":
        for key in ("a", "b"):
            if key not in settings:
                problems.append((f"/settings/{key}", f"required for {experiment}"))
    elif experiment == "check-locality" and ("a" in settings) != ("b" in settings):
        problems.append(("/settings", "give both a and b lists, or neither for the default grid"))


def _validate_integration(integration: Any, problems: List[Tuple[str, str]]) -> None:
    if not isinstance(integration, dict):
        problems.append(("/integration", "must be an object"))
        return
    method = integration.get("method", "quadrature")
    if method not in METHODS:
        problems.append(("/integration/method", f"must be one of {', '.join(METHODS)}"))
    n = integration.get("n", 4096)
    if not _is_int(n) or n < 1:
        problems.append(("/integration/n", "must be an integer >= 1"))
    seed = integration.get("seed")
    if method == "monte-carlo" and seed is None:
        problems.append(("/integration/seed", "required when method is monte-carlo"))
    elif seed is not None and not _is_int(seed):
        problems.append(("/integration/seed", "must be an integer"))
    for key in ("workers", "chunk_size"):
        value = integration.get(key, 1)
        if not _is_int(value) or value < 1:
            problems.append((f"/integration/{key}", "must be an integer >= 1"))
    for key in integration:
        if key not in IntegrationSpec.__annotations__:
            problems.append((f"/integration/{key}", "unknown field"))


def _validate_positive_ints(section: str, data: Any, fields: Tuple[str, ...], minimum: Dict[str, int],
                            problems: List[Tuple[str, str]]) -> None:
    if not isinstance(data, dict):
        problems.append((f"/{section}", "must be an object"))
        return
    for key, value in data.items():
        if key not in fields:
            problems.append((f"/{section}/{key}", "unknown field"))
        elif not _is_int(value) or value < minimum.get(key, 1):
            problems.append((f"/{section}/{key}", f"must be an integer >= {minimum.get(key, 1)}"))


def validate_config(data: Dict[str, Any]) -> List[Tuple[str, str]]:
    """Collect every violation in ``data`` as (JSON pointer, message) pairs."""
    problems: List[Tuple[str, str]] = []

    for key in data:
        if key not in TOP_LEVEL_FIELDS:
            problems.append((f"/{key}", "unknown field"))

    if "schema_version" in data:
        try:
            declared = Version(str(data["schema_version"]))
            if declared.major != Version(CONFIG_SCHEMA_VERSION).major:
                problems.append(("/schema_version",
                                 f"unsupported major version {declared.major} "
                                 f"(this tool reads {CONFIG_SCHEMA_VERSION})"))
        except InvalidVersion:
            problems.append(("/schema_version", f"not a version: {data['schema_version']!r}"))

    experiment = data.get("experiment")
    if experiment is None:
        problems.append(("/experiment", "required"))
    elif experiment not in EXPERIMENTS:
        problems.append(("/experiment", f"must be one of {', '.join(EXPERIMENTS)}"))

    model = data.get("model")
    needs_model = experiment in MODEL_EXPERIMENTS or (
        experiment == "polytope-membership" and "behavior" not in data)
    if model is None:
        if needs_model:
            problems.append(("/model", "required"))
    elif not isinstance(model, dict):
        problems.append(("/model", "must be an object"))
    elif "type" not in model:
        problems.append(("/model/type", "required"))
    elif model["type"] not in MODEL_BUILDERS:
        problems.append(("/model/type", f"unknown model type {model['type']!r}"))
    else:
        try:
            model_from_dict(model)
        except BellLabError as e:
            problems.append(("/model", str(e)))

    if "settings" in data:
        _validate_settings(experiment, data["settings"], problems)
    elif experiment in ("correlate", "chsh"):
        problems.append(("/settings", f"required for {experiment}"))
    elif experiment == "polytope-membership" and "behavior" not in data:
        problems.append(("/settings", "required when the behavior is built from a model"))

    if experiment == "polytope-membership" and "settings" in data and "behavior" not in data:
        settings = data["settings"]
        if isinstance(settings, dict):
            for key in ("a", "b"):
                values = settings.get(key)
                if not isinstance(values, list) or len(values) != 2:
                    problems.append((f"/settings/{key}", "membership needs exactly two angles per wing"))

    _validate_integration(data.get("integration", {}), problems)

    output = data.get("output", {})
    if not isinstance(output, dict):
        problems.append(("/output", "must be an object"))
    else:
        if output.get("format", "json") not in FORMATS:
            problems.append(("/output/format", f"must be one of {', '.join(FORMATS)}"))
        path = output.get("path")
        if path is not None and not isinstance(path, str):
            problems.append(("/output/path", "must be a string"))

    tolerance = data.get("tolerance", DEFAULT_TOLERANCE)
    if not _is_number(tolerance) or tolerance <= 0:
        problems.append(("/tolerance", "must be a positive number"))

    if "grid" in data:
        _validate_positive_ints("grid", data["grid"], ("n_settings", "n_hidden"), {}, problems)
    if "search" in data:
        _validate_positive_ints("search", data["search"], ("grid_n", "refine_iters"),
                                {"grid_n": 8, "refine_iters": 0}, problems)

    if "behavior" in data:
        try:
            behavior = Behavior.from_dict(data["behavior"])
            if behavior.shape != (2, 2) and experiment == "polytope-membership":
                problems.append(("/behavior", "membership needs two settings per wing"))
        except (BellLabError, KeyError, TypeError, ValueError) as e:
            problems.append(("/behavior", f"invalid behavior: {e}"))

    if "hbt" in data:
        hbt = data["hbt"]
        if not isinstance(hbt, dict):
            problems.append(("/hbt", "must be an object"))
        else:
            for key in hbt:
                if key not in HbtConfig.__annotations__:
                    problems.append((f"/hbt/{key}", "unknown field"))
            try:
                HbtConfig.from_dict(hbt)
            except (BellLabError, TypeError, ValueError) as e:
                problems.append(("/hbt", str(e)))

    if "exact" in data and not isinstance(data["exact"], bool):
        problems.append(("/exact", "must be true or false"))

    return problems
