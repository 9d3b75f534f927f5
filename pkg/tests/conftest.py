import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Property tests draw whole matrices; the default deadline is too twitchy
# for the first jitted/BLAS-warmed call on a cold process.
settings.register_profile(
    "mc",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("mc")


@pytest.fixture
def rng():
    return np.random.default_rng(0xA5A5)
