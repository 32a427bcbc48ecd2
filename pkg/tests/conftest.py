import numpy as np
import pytest

from tdecs import dictionary as dct
from tdecs.signal_model import ChirpSpec


@pytest.fixture(scope="session")
def spec():
    return ChirpSpec()


@pytest.fixture(scope="session")
def psi(spec):
    return dct.build(spec)


@pytest.fixture(scope="session")
def geom(psi):
    return dct.polar_geometry(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
