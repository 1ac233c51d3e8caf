import numpy as np
import pytest

from sunpatch.phantom import synthesize


@pytest.fixture(scope="session")
def single_spot():
    return synthesize("single_spot", 64, seed=0)


@pytest.fixture(scope="session")
def noise_pair():
    return synthesize("noise", 64, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
