import numpy as np
import pytest

from darbouxosc.model import Parameters


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hyperbolic():
    return Parameters(0.02, 1.0, 3)


@pytest.fixture
def spherical():
    return Parameters(-0.02, 1.0, 3)


# (params, kind) for every manifold kind at N = 3
KIND_CASES = [
    (Parameters(0.02, 1.0, 3), "type_i"),
    (Parameters(-0.02, 1.0, 3), "type_ii"),
    (Parameters(-0.02, 1.0, 3), "type_iii"),
    (Parameters(0.0, 1.3, 3), "flat"),
]
