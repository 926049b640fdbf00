"""Shared pytest plumbing.

Collects the acceptance-gate PASS/FAIL lines emitted by
tests/test_acceptance.py and replays them in the terminal summary, where
output capture cannot swallow them.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
