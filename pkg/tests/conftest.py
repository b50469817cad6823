import numpy as np
import pytest
from hypothesis import settings

from qigeom import models as M

settings.register_profile("fast", max_examples=25, deadline=None)
settings.load_profile("fast")


@pytest.fixture(scope="session")
def qubit():
    return M.qubit()


@pytest.fixture(scope="session")
def random3():
    return M.random_analytic(3, 2, seed=3)


@pytest.fixture(scope="session")
def expfam():
    return M.exponential_family()


def bloch(theta, phi):
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
