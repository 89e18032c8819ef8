import math

import numpy as np
import pytest

from aggmin.energy import build_interaction
from aggmin.models import ExponentialKernel, PowerEntropy, QuadraticEntropy
from aggmin.radial import RadialGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope='session')
def quadratic():
    return QuadraticEntropy(chi0=1.0)


@pytest.fixture(scope='session')
def cubic():
    return PowerEntropy(m=3)


@pytest.fixture(scope='session')
def exp_kernel():
    return ExponentialKernel(c=1.0, a=1.0, d=2)


@pytest.fixture(scope='session')
def weak_kernel():
    """||K||_1 = 1/2, below twice the quadratic coefficient."""
    return ExponentialKernel(c=1 / (4 * math.pi), a=1.0, d=2)


@pytest.fixture(scope='session')
def grid10():
    return RadialGrid(d=2, R=10.0, N=256)


@pytest.fixture(scope='session')
def op_exp(grid10, exp_kernel):
    return build_interaction(grid10, exp_kernel)


@pytest.fixture(scope='session')
def grid20():
    return RadialGrid(d=2, R=20.0, N=256)


@pytest.fixture(scope='session')
def op_weak(grid20, weak_kernel):
    return build_interaction(grid20, weak_kernel)
