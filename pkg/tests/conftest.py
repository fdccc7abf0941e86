import numpy as np
import pytest

import tsl

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def grid2d():
    return tsl.make_grid(2, (TWO_PI, TWO_PI), 16)


@pytest.fixture(scope="session")
def grid2d32():
    return tsl.make_grid(2, (TWO_PI, TWO_PI), 32)


@pytest.fixture(scope="session")
def grid3d():
    return tsl.make_grid(3, (TWO_PI, TWO_PI, TWO_PI), 16)
