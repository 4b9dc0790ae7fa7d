from pathlib import Path

import pytest

from agislice.model import load_config

ROOT = Path(__file__).resolve().parents[1]
TABLE1 = ROOT / "configs" / "table1.ini"

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture(scope="session")
def table1():
    return load_config(TABLE1)


@pytest.fixture(scope="session")
def mob(table1):
    return table1.mobility


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES.values():
        terminalreporter.write_line(line)
