import numpy as np
import pytest

from bnlsv.grid import make_grid
from bnlsv.groundstate import solve_ground_state
from bnlsv.model import ModelParams, Potential

R_MAX = 30.0
N_DEFAULT = 4096


@pytest.fixture(scope="session")
def params():
    return ModelParams(10, 2.0)


@pytest.fixture(scope="session")
def grid():
    return make_grid(10, R_MAX, N_DEFAULT)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(10, 20.0, 512)


@pytest.fixture(scope="session")
def gs(params, grid):
    return solve_ground_state(params, grid)


@pytest.fixture(scope="session")
def decaying_potential():
    """V = (1 + r^2)^-9: repulsive, positive, decays faster than r^-(N+4) at N=10."""
    return Potential.inverse_power(1.0, 9.0)


def smooth_field(grid, rng, terms=3, complex_valued=True):
    """Random sum of Gaussians with random phases; decays well inside r_max."""
    r = grid.nodes
    u = np.zeros(grid.n, dtype=complex)
    for _ in range(terms):
        amp = rng.uniform(0.2, 2.0)
        center = rng.uniform(0.0, 0.15 * grid.r_max)
        width = rng.uniform(0.7, 2.5)
        phase = rng.uniform(0, 2 * np.pi) if complex_valued else 0.0
        u += amp * np.exp(1j * phase) * np.exp(-((r - center) / width) ** 2)
    return u


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, printed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def emit(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
