import numpy as np
import pytest

from nlheat.kernel import make_fractional_kernel
from nlheat.lattice import build_grid
from nlheat.nonlocal_op import assemble
from nlheat.spectral import solve_eigenproblem

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid1d():
    return build_grid([[0.0, 1.0]], 1 / 32, 2.0)


@pytest.fixture(scope="session")
def op1d(grid1d):
    return assemble(grid1d, make_fractional_kernel(1, 0.5))


@pytest.fixture(scope="session")
def basis1d(op1d):
    return solve_eigenproblem(op1d)


@pytest.fixture(scope="session")
def op2d():
    grid = build_grid([[0.0, 1.0], [0.0, 1.0]], 1 / 8, 2.0 * np.sqrt(2.0))
    return assemble(grid, make_fractional_kernel(2, 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
