import sys

import numpy as np
import pytest

from vacuum_front.geometry import ShiftProfile
from vacuum_front.grid import Grid
from vacuum_front.problem import FreeBoundaryProblem
from vacuum_front.thermo import FluidModel, StiffenedGas


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return Grid(nt=12, n1=17, n2=8, n3=1, T=0.4, X1=0.8, ghost=3)


def make_problem(relativistic=False, grid=None):
    model = FluidModel(StiffenedGas(c0=0.6 if relativistic else 1.0), relativistic=relativistic)
    X1 = 0.3 if relativistic else 0.8
    grid = grid or Grid(nt=24, n1=33, n2=8, n3=1, T=0.4, X1=X1, ghost=3)
    return FreeBoundaryProblem(model, ShiftProfile(0.1, 1.0), grid)


@pytest.fixture
def problem():
    return make_problem()


@pytest.fixture
def rel_problem():
    return make_problem(relativistic=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
