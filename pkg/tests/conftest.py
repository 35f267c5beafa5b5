import numpy as np
import pytest

from lipfree.random_spaces import C4, L3, U4

ACCEPTANCE_LINES: list = []


@pytest.fixture
def u4():
    return U4()


@pytest.fixture
def l3():
    return L3()


@pytest.fixture
def c4():
    return C4()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
