import pytest

from pendgrav.config import SystemConfig

ACCEPTANCE_LINES = []


@pytest.fixture
def default_config():
    return SystemConfig()


@pytest.fixture
def derived(default_config):
    return default_config.derive()


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""

    def report(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
