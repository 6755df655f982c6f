"""Shared fixtures and the acceptance-criterion report.

Acceptance tests register one line per criterion through the ``criterion_report``
fixture; the lines are echoed in the terminal summary so a full run ends with a
compact pass/fail table.
"""

import numpy as np
import pytest

_CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    def record(number: int, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        _CRITERION_LINES.append(f"criterion {number:>2}: {verdict}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
