"""Shared fixtures: coarse grids sized for seconds-long unit runs.

Acceptance tests build their own desk-scale grids; everything else should
use these to keep the suite quick. The terminal-summary hook replays the
one-line verdicts collected by the acceptance module so they stay visible
under captured output.
"""

import numpy as np
import pytest

from henon_annulus import ProblemParams, build_axi_grid, build_radial_grid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def radial_grid():
    return build_radial_grid(400, "graded")


@pytest.fixture(scope="session")
def radial_grid_fine():
    return build_radial_grid(2000, "graded")


@pytest.fixture(scope="session")
def axi_grid():
    return build_axi_grid(96, 32, "graded-polar")


@pytest.fixture(scope="session")
def axi_grid_small():
    return build_axi_grid(48, 16, "graded-polar")


@pytest.fixture(scope="session")
def params_alpha1_p4():
    return ProblemParams(1.0, 4.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
