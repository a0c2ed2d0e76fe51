"""Test configuration: collects acceptance-criterion verdicts and prints one
pass/fail line per criterion in the terminal summary.
"""

from __future__ import annotations

import pytest

ACCEPTANCE_RESULTS: list[tuple[int, str, bool]] = []


@pytest.fixture
def acceptance():
    """Returns a recorder: acceptance(n, description, passed) -> passed."""

    def record(criterion: int, description: str, passed: bool) -> bool:
        ACCEPTANCE_RESULTS.append((criterion, description, passed))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, description, passed in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {criterion}: {verdict} - {description}")
