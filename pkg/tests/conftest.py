import numpy as np
import pytest

from auxmi.data import BINARY, CONTINUOUS, Dataset

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    return Dataset.from_columns(
        {
            "y": [0, 1, 1, 0, 1],
            "x": [1.5, np.nan, 2.0, np.nan, -0.5],
            "w": [0.1, 0.2, np.nan, 0.4, 0.5],
        },
        {"y": BINARY, "x": CONTINUOUS, "w": CONTINUOUS},
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
