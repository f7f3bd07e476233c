"""Shared pytest plumbing.

The acceptance tests append one formatted line per criterion to
``ACCEPTANCE_LINES``; the terminal-summary hook replays them so the
pass/fail ledger is visible even when every test passes (pytest normally
swallows stdout of passing tests).
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
