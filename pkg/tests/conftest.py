import warnings

import numpy as np
import pytest

from dampedwave.bubbles import TailTruncationWarning
from dampedwave.grid import RadialGrid
from dampedwave.spectral import build_pack


@pytest.fixture(autouse=True)
def _quiet_tails():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailTruncationWarning)
        yield


@pytest.fixture(scope="session")
def pack6():
    return build_pack(6, 2048)


@pytest.fixture(scope="session")
def grid6():
    return RadialGrid.uniform(6, 4096, 200.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
