import numpy as np
import pytest

from benflow import DiscreteSpace

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def space31():
    return DiscreteSpace(31)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
