import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

PHI0 = 1 / np.sqrt(2 * np.pi)


def phi(x, var=1.0):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2 / var) / np.sqrt(2 * np.pi * var)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
