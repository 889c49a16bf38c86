"""
Shared fixtures for the simulator test suite
"""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.channel import cable_model, equal_length_binder, generate_channel, select_tones  # noqa: E402
from src.profile import make_profile  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gfast106():
    return make_profile("gfast106")


@pytest.fixture(scope="session")
def gfast212():
    return make_profile("gfast212")


@pytest.fixture(scope="session")
def cat5():
    return cable_model("cat5")


@pytest.fixture
def small_tensor(gfast106, cat5):
    """4 lines x 16 tones, 200 m CAT5, upstream"""
    binder = equal_length_binder(4, 200.0, cat5)
    return generate_channel(binder, gfast106, seed=1, tones=select_tones(gfast106, 16))


def complex_matrix(rng, n, scale=1.0):
    return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
