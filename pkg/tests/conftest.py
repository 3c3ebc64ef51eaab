import numpy as np
import pytest

from zrsolver.model import Params, SolitonSpec, initial_single
from zrsolver.spectral import build_grid


@pytest.fixture
def params():
    """Parameters of the solitary-wave accuracy and conservation tests."""
    return Params(1.0, 1.0, 1.0, 7.0)


@pytest.fixture
def spec():
    return SolitonSpec(c=1.0, eta=1.0, x0=2.0, d0=0.0)


@pytest.fixture
def grid():
    return build_grid(-32.0, 32.0, 256)


@pytest.fixture
def coarse_grid():
    return build_grid(-32.0, 32.0, 64)


@pytest.fixture
def soliton_state(params, spec, grid):
    return initial_single(params, spec, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
