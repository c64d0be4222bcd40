"""Shared fixtures and the acceptance-summary hook.

Acceptance tests record one line per criterion through the record_criterion
fixture; the terminal summary prints them after the run so the pass/fail
status of every criterion is visible in one block.
"""

import pytest

_ACCEPTANCE_LINES = {}


@pytest.fixture
def record_criterion():
    def rec(number, passed, detail, suffix=""):
        key = (int(number), suffix)
        status = "PASS" if passed else "FAIL"
        label = "criterion %2d%s" % (number, (" (%s)" % suffix) if suffix else "")
        _ACCEPTANCE_LINES[key] = "%s [%s] %s" % (label, status, detail)
    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
