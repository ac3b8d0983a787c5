import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_RESULTS = []


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the end-of-run acceptance summary."""

    def record(number, passed, detail):
        _RESULTS.append((number, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
