import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eoscsp.generate import sample_scenario  # noqa: E402


@pytest.fixture
def scenario():
    return sample_scenario()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
