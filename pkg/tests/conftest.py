import numpy as np
import pytest

from changeplane import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n=40, r=3, p=2, q=3, family="gaussian"):
    """Small random dataset with intercepts and X columns inside x_base."""
    x_base = np.hstack([np.ones((n, 1)), rng.standard_normal((n, r - 1))])
    x_diff = x_base[:, :p].copy()
    z_group = np.hstack([np.ones((n, 1)), rng.standard_normal((n, q - 1))])
    eta = x_base @ rng.uniform(-0.5, 0.5, r)
    if family == "gaussian":
        y = eta + rng.standard_normal(n)
    elif family == "binomial":
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    elif family == "probit":
        y = (rng.standard_normal(n) <= eta).astype(float)
    elif family == "poisson":
        y = rng.poisson(np.exp(np.clip(eta, None, 5.0))).astype(float)
    elif family == "quantile":
        y = eta + rng.standard_normal(n)
    else:
        raise ValueError(family)
    return Dataset(y=y, x_base=x_base, x_diff=x_diff, z_group=z_group)
