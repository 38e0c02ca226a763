import numpy as np
import pytest

from crackhom.assembly import ElasticityTensor
from crackhom.geometry import Box, CrackSpec, build_reference_cell, tile_domain
from crackhom.unfolding import build_setup

CIRCLE = CrackSpec(kind="circle", center=(0.5, 0.5), radius=0.25, theta=0.5)


@pytest.fixture(scope="session")
def tensor():
    return ElasticityTensor.isotropic(1.0, 1.0)


@pytest.fixture(scope="session")
def cell25():
    return build_reference_cell(CIRCLE, h=0.25).duplicated_cell()


@pytest.fixture(scope="session")
def cell30():
    return build_reference_cell(CIRCLE, h=0.3).duplicated_cell()


@pytest.fixture(scope="session")
def domain():
    return Box()


_SETUPS = {}


def setup_for(cell, eps, key):
    """Session-cached tiled setup."""
    k = (key, eps)
    if k not in _SETUPS:
        _SETUPS[k] = build_setup(tile_domain(Box(), ("bottom",), cell, eps))
    return _SETUPS[k]


@pytest.fixture(scope="session")
def setup25_quarter(cell25):
    return setup_for(cell25, 0.25, "h25")


@pytest.fixture(scope="session")
def setup25_half(cell25):
    return setup_for(cell25, 0.5, "h25")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260826)
