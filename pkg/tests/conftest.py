import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# keep the suite deterministic and free of timing flakes
settings.register_profile(
    "ci",
    max_examples=50,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
