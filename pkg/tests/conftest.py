"""Shared fixtures for the bell-lab test suite."""

import json
import math

import numpy as np
import pytest

from bell_lab.models import UnnikrishnanParams, unnikrishnan_model

CANONICAL_A = (0.0, math.pi / 2)
CANONICAL_B = (math.pi / 4, 3 * math.pi / 4)
# (a, a', b, b') reaching S = -2*sqrt(2) for E = -cos(a - b) under S = E00 + E01 + E10 - E11
OPTIMAL_SINGLET = (0.0, math.pi / 2, math.pi / 4, 7 * math.pi / 4)
TSIRELSON = 2.0 * math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def phase_model():
    """The phase-correlation model at s = 1/2, delta_phi = pi (singlet correlators)."""
    return unnikrishnan_model(UnnikrishnanParams(s=0.5, delta_phi=math.pi))


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a temporary JSON file and return its path."""
    def write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
    return write
