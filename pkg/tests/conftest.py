"""Shared acceptance-line reporting: one PASS/FAIL line per criterion check."""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """Log one acceptance check, then enforce it.

    The line lands both in the test's captured output and in a summary
    section at the end of the run, so failing checks stay visible next to
    the passing ones.
    """
    line = f"criterion {name}: {'PASS' if passed else 'FAIL'} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
