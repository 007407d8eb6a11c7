import numpy as np
import pytest

# every property/invariant suite runs under each of these master seeds
MASTER_SEEDS = (101, 202, 303)

ACCEPTANCE_LINES = []


@pytest.fixture(params=MASTER_SEEDS)
def master_seed(request):
    return request.param


@pytest.fixture
def rng(master_seed):
    return np.random.default_rng(master_seed)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
