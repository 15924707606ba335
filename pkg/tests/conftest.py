import sys
from pathlib import Path

import pytest

from prefplan import world
from prefplan.session import data_path

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


def scenario_path(name):
    return data_path("scenarios", f"{name}.json")


@pytest.fixture(scope="session")
def tabletop():
    return world.load_scenario(scenario_path("tabletop")).state


@pytest.fixture(scope="session")
def arrangement():
    return world.load_scenario(scenario_path("arrangement")).state


@pytest.fixture(scope="session")
def handover():
    return world.load_scenario(scenario_path("handover")).state


@pytest.fixture(scope="session")
def regrasp():
    return world.load_scenario(scenario_path("regrasp")).state


# one summary line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
