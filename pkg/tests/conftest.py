import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bounds import BoundParams  # noqa: E402
from datagen import generate  # noqa: E402


@pytest.fixture
def orthogonal_data():
    """Three orthogonal 4-dim subspaces in R^50, 20 clean points each."""
    return generate(50, 4, 3, 0.0, [20, 20, 20], 0.0, np.random.default_rng(7))


@pytest.fixture
def noisy_data():
    return generate(60, 5, 3, 0.2, [25, 25, 25], 0.1, np.random.default_rng(11))


@pytest.fixture
def large_n_params():
    return BoundParams(n=10_000, N=10_000, cluster_size=3000, d_L=20, sigma=0.01, tau=0.5,
                       p=3, M=5, c_const=1.0)
