import sys
import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sparse_dense(rng, m, n, density=0.3, values=(-3, -2, -1, 1, 2, 3)):
    """Dense integer matrix with roughly ``density`` nonzeros."""
    mask = rng.random((m, n)) < density
    return np.where(mask, rng.choice(values, size=(m, n)), 0).astype(np.float64)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
