import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_dist(rng, n):
    """A strictly positive probability vector (Dirichlet-ish)."""
    w = rng.gamma(1.0, 1.0, size=n) + 1e-9
    return w / w.sum()
