import pytest

_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def log(number: int, passed: bool, measured: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {measured}"
        _LINES.append((number, line))
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(line)
