import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from biotprec.bench.problems import config_for, setup_problem  # noqa: E402


@pytest.fixture(scope="session")
def mandel_small():
    """(mesh, tags, blocks, params) of the N=4 Mandel quadrant."""
    return setup_problem("mandel2d", 4, config_for("mandel2d"))


@pytest.fixture(scope="session")
def mandel_2():
    return setup_problem("mandel2d", 2, config_for("mandel2d"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction runs")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
