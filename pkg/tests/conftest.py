from pathlib import Path

import pytest

from interaction_audit.dcm import load_signatures
from interaction_audit.ingest import load_app
from interaction_audit.policy import load_lexicon

FIXTURES = Path(__file__).parent / "fixtures"
APPS = FIXTURES / "apps"
APP_NAMES = ["minimal", "wrapper", "custom", "this_listener", "gestures", "yr", "multidex", "corrupt"]

# Lines printed by the acceptance tests, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def db():
    return load_signatures()


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def apps():
    return {name: load_app(APPS / name) for name in APP_NAMES}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
