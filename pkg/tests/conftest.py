import numpy as np
import pytest
from hypothesis import settings

from robust_t.experiments import SimConfig, simulate_dataset
from robust_t.model import Dataset

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

# The n=20 dataset used by the outlier experiments: x2 = 1..20, beta = (1, 1), sigma = 1.
SEC3_SEED = 1


@pytest.fixture(scope="session")
def sec3_data():
    return simulate_dataset(SimConfig(n=20, p=2, beta_true=(1.0, 1.0), sigma_true=1.0,
                                      covariate_scheme="sequential", seed=SEC3_SEED))


def random_dataset(rng, n, p, scale=1.0):
    X = np.ones((n, p))
    if p > 1:
        X[:, 1:] = rng.standard_normal((n, p - 1))
    beta = rng.standard_normal(p)
    y = X @ beta + scale * rng.standard_t(3, size=n)
    return Dataset(X, y)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(num))
