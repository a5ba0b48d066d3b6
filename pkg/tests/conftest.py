"""Shared pytest configuration.

Acceptance tests register a one-line verdict per criterion; the lines are
printed together at the end of the session so they survive output capture.
"""

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
