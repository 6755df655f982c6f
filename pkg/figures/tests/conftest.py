"""Criterion report for the figure pipeline's acceptance line."""

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
    terminalreporter.section("acceptance criteria (figures)")
    for line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
