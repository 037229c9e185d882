import numpy as np
import pytest

from kerrbattery.fock import HilbertSpec

# Criterion lines recorded by test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def random_density_matrix(rng, dim, rank=None):
    rank = dim if rank is None else rank
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def spec33():
    return HilbertSpec(3, 3)
