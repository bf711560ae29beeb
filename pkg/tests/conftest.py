import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo checks that take more than a few seconds")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
