"""Prints the acceptance scorecard after the terminal summary.

Capture (-s or not) swallows in-test prints, so acceptance tests register
their pass/fail lines here and the hook emits them once per run.
"""

SCORECARD: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if SCORECARD:
        terminalreporter.section("acceptance scorecard")
        for line in SCORECARD:
            terminalreporter.write_line(line)
