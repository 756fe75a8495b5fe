import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from landcover.data_model import Dataset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs():
    """Three well separated 2-D Gaussian blobs, 15 points each."""
    r = np.random.default_rng(3)
    centres = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    X = np.vstack([c + 0.4 * r.standard_normal((15, 2)) for c in centres])
    y = np.repeat(np.arange(3), 15)
    return Dataset(X, y)


def write_csv(path, X, y):
    X = np.atleast_2d(X)
    lines = [",".join(f"f{i + 1}" for i in range(X.shape[1])) + ",label"]
    lines += [",".join(repr(float(v)) for v in row) + f",{int(c)}" for row, c in zip(X, y)]
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
