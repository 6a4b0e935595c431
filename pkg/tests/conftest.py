import pytest

from seqreveal import _kernels as K
from seqreveal.environment import Environment


def pytest_configure(config):
    K.warmup()


@pytest.fixture(scope="session")
def env2():
    return Environment.linear(theta_L=2.0)


@pytest.fixture(scope="session")
def env25():
    return Environment.linear(theta_L=2.5)


@pytest.fixture(scope="session")
def opt2(env2):
    from seqreveal.optimizer import optimize
    return optimize(env2, budget=20000)
