import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the project root is on the import path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from stl_decomposition.geometry import Polytope, regular_polytope  # noqa: E402
from stl_decomposition.scenario import load_scenario  # noqa: E402

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def unit_box():
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    return Polytope(A, [0.0, 0.0], np.ones(4))


@pytest.fixture
def hexagon():
    return regular_polytope(6, 0.4)


@pytest.fixture
def toy_chain():
    return load_scenario(SCENARIOS / "toy_chain.json")


@pytest.fixture
def five_agents():
    return load_scenario(SCENARIOS / "five_agents.json")


@pytest.fixture
def mars_path():
    return SCENARIOS / "mars_exploration.json"
