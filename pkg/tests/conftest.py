import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record and print one ``PASS/FAIL criterion N`` line, then assert."""
    def report(number, ok, detail, elapsed=None, limit=None):
        timing = ""
        if limit is not None:
            timing = f" [{elapsed:.2f}s / limit {limit:g}s]"
            ok = ok and elapsed < limit
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}{timing}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
