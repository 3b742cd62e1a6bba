import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# acceptance lines collected during the session, echoed in the terminal summary
ACCEPTANCE = []


def load_fixture(name: str) -> dict:
    with open(FIXTURES / f"{name}.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def fixture_data():
    return load_fixture


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
