import numpy as np
import pytest

from isotruss.truss import triforce


@pytest.fixture(scope="session")
def model():
    """Default testbed topology and nominal configuration."""
    return triforce(1.0)


@pytest.fixture()
def topo(model):
    return model[0]


@pytest.fixture()
def x0(model):
    return model[1].copy()


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
