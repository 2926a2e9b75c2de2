import numpy as np
import pytest

from truncscore import RandomSource, simulate_dataset
from truncscore.simulation import SCENARIOS


@pytest.fixture(scope="session")
def table1_data():
    return simulate_dataset(SCENARIOS["table1"], 3000, RandomSource(20240601))


@pytest.fixture(scope="session")
def table5_data():
    return simulate_dataset(SCENARIOS["table5"], 3000, RandomSource(20240602))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
