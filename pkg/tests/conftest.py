import numpy as np
import pytest

from viscoctl.field import GridSpec
from viscoctl.materials import ViscoParams


@pytest.fixture
def true_params():
    # pde_params(burgers_coeffs(2, 2, 1), eps=1)
    return ViscoParams(1.0, 2.0, 0.5, -2.0)


@pytest.fixture
def desk_grid():
    return GridSpec(17, 9, 9)


@pytest.fixture
def line_grid():
    return GridSpec(31, 1, 1, transverse=False)


def log_slope(t, y):
    t = np.asarray(t, dtype=float)
    return float(np.polyfit(t, np.log(np.asarray(y, dtype=float)), 1)[0])


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
