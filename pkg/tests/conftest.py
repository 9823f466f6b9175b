"""Collects the one-line PASS/FAIL verdicts of the acceptance suite and prints
them in the terminal summary, so they appear even with captured output."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
