import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import klsmooth as k

settings.register_profile(
    "ci",
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_prob_vector(rng, d=None, allow_zeros=True) -> k.ProbVector:
    """Mixed-shape random distribution for fuzzing."""
    if d is None:
        d = int(rng.integers(2, 13))
    style = int(rng.integers(0, 4))
    if style == 0:
        w = rng.dirichlet(np.ones(d))
    elif style == 1:
        w = rng.dirichlet(np.full(d, 0.3))
    elif style == 2:
        w = np.exp(-rng.uniform(0.05, 1.0) * np.arange(d)) * rng.uniform(0.5, 2.0, d)
    else:
        w = rng.dirichlet(np.ones(d))
        if allow_zeros and d > 2:
            kill = rng.random(d) < 0.3
            kill[int(np.argmax(w))] = False
            w = np.where(kill, 0.0, w)
    return k.make_prob_vector(w)
