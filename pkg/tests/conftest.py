import numpy as np
import pytest

from qgshear.grid import build_grid, build_operators
from qgshear.prediction import topography


@pytest.fixture(scope="session")
def ops4():
    return build_operators(build_grid(4))


@pytest.fixture(scope="session")
def ops6():
    return build_operators(build_grid(6))


@pytest.fixture(scope="session")
def ops8():
    return build_operators(build_grid(8))


@pytest.fixture(scope="session")
def h6():
    return topography(build_grid(6))


@pytest.fixture(scope="session")
def h8():
    return topography(build_grid(8))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
