"""Shared reporting for the acceptance suite.

Each acceptance test registers a one-line verdict before asserting, so the
terminal summary always shows a pass/fail line per criterion even when the
assertion aborts the test body.
"""

ACCEPTANCE_RESULTS = []


def report(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {number:2d} {name}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_RESULTS.append((number, line))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
