import pytest

ACCEPTANCE_LINES = []


def record(criterion, ok, detail, seconds):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail}; {seconds:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
