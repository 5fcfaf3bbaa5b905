"""Shared fixtures, plus the acceptance-criteria reporter.

Acceptance tests call the ``acceptance`` fixture with a criterion name, a
boolean, and a detail string.  The result is recorded and also asserted, so
a failing criterion fails its test.  At the end of the run the collected
lines are printed in one block, one line per criterion.
"""

import numpy as np
import pytest

_LINES = []


@pytest.fixture
def acceptance():
    def record(name, ok, detail):
        status = "PASS" if ok else "FAIL"
        _LINES.append(f"{status} {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
