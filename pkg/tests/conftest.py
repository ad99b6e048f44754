import numpy as np
import pytest

from broyden_lab.problems import lse_random, quad_make
from broyden_lab.shared_libraries.sampling import log_spaced_spectrum


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def small_quadratic():
    return quad_make(log_spaced_spectrum(5, 1.0, 100.0), seed=3)


@pytest.fixture
def lse_problem():
    return lse_random(8, 20, 1.0, 0.1, seed=7)
