import numpy as np
import pytest

import helpers


@pytest.fixture(scope="session")
def ico2():
    return helpers.icosphere(2)


@pytest.fixture(scope="session")
def ico3():
    return helpers.icosphere(3)


@pytest.fixture(scope="session")
def ico4():
    return helpers.icosphere(4)


@pytest.fixture(scope="session")
def ellipsoid3():
    return helpers.ellipsoid(3, (2.0, 1.0, 0.85))


@pytest.fixture
def rng():
    return np.random.default_rng(7)
