import numpy as np
import pytest

from bowave.params import PhysParams
from bowave.spectral import make_grid
from bowave.wavetank import WWState

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_holo(grid, rng, kmax=8, decay=0.3, mean=False):
    sp = np.zeros(grid.n, complex)
    m = (grid.index < 0) & (grid.index >= -kmax)
    if mean:
        m |= grid.index == 0
    sp[m] = (rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())) * np.exp(-decay * np.abs(grid.index[m]))
    return sp


def random_state(grid, rng, amp, kmax=8, mean=False):
    W, Q = random_holo(grid, rng, kmax, mean=mean), random_holo(grid, rng, kmax, mean=mean)
    s = np.abs(W).max()
    return WWState.from_spectra(grid, amp * W / s, amp * Q / s)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid2pi():
    return make_grid(128, 2 * np.pi)


@pytest.fixture
def params():
    return PhysParams()
