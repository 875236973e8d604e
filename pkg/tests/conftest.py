from pathlib import Path

import pytest

from dipaf.board import load_map
from dipaf.state import initial_state, load_state

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def standard():
    return load_map("standard")


@pytest.fixture(scope="session")
def turkey_1905():
    return load_state(DATA / "turkey_1905.json")


@pytest.fixture(scope="session")
def opening(standard):
    return initial_state(standard)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
