import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(capsys):
    """Print a line straight to the terminal, bypassing output capture."""
    def emit(line: str) -> None:
        with capsys.disabled():
            print(line, flush=True)
    return emit


def random_instance(rng, k, d, n, scale=10.0):
    centers = rng.uniform(0, scale, size=(k, d))
    labels = rng.integers(0, k, size=n)
    data = centers[labels] + rng.normal(scale=scale / (2 * k), size=(n, d))
    return data, centers
