import numpy as np
import pytest

from biharm4 import build_grid


@pytest.fixture(scope="session")
def grid96():
    return build_grid(96, 16.0)


@pytest.fixture(scope="session")
def grid128():
    return build_grid(128, 16.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
