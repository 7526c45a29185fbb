import numpy as np
import pytest

from cubt import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_data(values, labels=None):
    return Dataset(np.asarray(values, dtype=float), labels=labels)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
