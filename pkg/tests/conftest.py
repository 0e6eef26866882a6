import numpy as np
import pytest

from tabdrw.synth import GaussianSpec, generate


@pytest.fixture
def gaussian_table():
    def make(n_rows=1000, p=11, seed=0, covariance="identity", rho=0.0):
        return generate(GaussianSpec(n_rows, p, covariance, rho, seed=seed))
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
