import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


@pytest.fixture
def scenario_dir():
    return os.path.abspath(SCENARIO_DIR)


# One line per acceptance criterion in the terminal summary, printed whether
# or not output capture is on.
_CRITERIA = {}


def record_criterion(number, label, passed):
    _CRITERIA[number] = (label, passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        label, ok = _CRITERIA[n]
        terminalreporter.write_line(
            "criterion %d: %s - %s" % (n, "PASS" if ok else "FAIL", label))
