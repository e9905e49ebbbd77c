import sys

import numpy as np
import pytest

from hclda.lda import LabeledDataset
from hclda.simulate import generate_model1, generate_model2


def random_dataset(rng, n, p, J, spread=3.0):
    """Gaussian classes with every label present at least twice."""
    means = spread * rng.normal(size=(J, p))
    y = np.concatenate([np.repeat(np.arange(1, J + 1), 2), rng.integers(1, J + 1, n - 2 * J)])
    rng.shuffle(y)
    X = means[y - 1] + rng.normal(size=(n, p))
    return LabeledDataset(X, y, J)


@pytest.fixture(scope="session")
def model2_600():
    data, _ = generate_model2(600, 20, 30, seed=11)
    return data


@pytest.fixture(scope="session")
def model2_pair():
    return generate_model2(600, 20, 30, seed=11)


@pytest.fixture(scope="session")
def model1_big():
    return generate_model1(2000, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mods = [m for name, m in sys.modules.items() if name.split(".")[-1] == "test_acceptance"]
    lines = getattr(mods[0], "RESULTS", None) if mods else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
