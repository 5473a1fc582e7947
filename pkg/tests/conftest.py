import json
from pathlib import Path

import pytest

ORACLE_PATH = Path(__file__).parent / "oracles" / "frozen.json"

collect_ignore = ["oracles/make_oracles.py"]

_CRITERIA_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def oracles() -> dict:
    return json.loads(ORACLE_PATH.read_text())


@pytest.fixture(scope="session")
def criteria_log(pytestconfig) -> dict:
    return pytestconfig.stash.setdefault(_CRITERIA_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_CRITERIA_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        terminalreporter.write_line(log[number])
