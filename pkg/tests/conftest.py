import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_interval(rng, K, n_points=None):
    """Feasible box from the componentwise range of a few Dirichlet draws."""
    m = n_points or rng.integers(1, 6)
    pts = rng.dirichlet(np.full(K, rng.uniform(0.2, 3.0)), size=m)
    return pts.min(axis=0), pts.max(axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
