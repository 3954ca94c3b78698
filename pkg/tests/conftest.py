import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Deterministic, CI-friendly hypothesis profile.
settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


def random_quat(rng) -> np.ndarray:
    """Uniform random unit quaternion as an xyzw array (Marsaglia via normals)."""
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
