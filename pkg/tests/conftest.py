import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ridgetune.glm import Dataset
from ridgetune.simgen import illustrative_dataset

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ds1():
    return illustrative_dataset(1)


@pytest.fixture(scope="session")
def ds2():
    return illustrative_dataset(2)


def random_dataset(rng, n, k, slope=0.5, intercept=-0.3):
    X = rng.standard_normal((n, k))
    eta = intercept + X @ np.full(k, slope)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return Dataset.from_covariates(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
