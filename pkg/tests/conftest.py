import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dssm.synth import make_benchmark

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def bench0():
    return make_benchmark(0)


@pytest.fixture(scope="session")
def clean_bench():
    return make_benchmark(1, drift=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_classes(rng, means, n_per_class=200, sd=1.0, n_features=11):
    """Labeled samples from isotropic Gaussians; ``means`` rows are padded to ``n_features``."""
    X, y = [], []
    for k, mu in enumerate(means):
        mu = np.pad(np.asarray(mu, dtype=float), (0, n_features - len(mu)))
        X.append(mu + sd * rng.standard_normal((n_per_class, n_features)))
        y.append(np.full(n_per_class, k))
    return np.vstack(X), np.concatenate(y)
