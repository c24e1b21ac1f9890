import pytest

# (number, ok, detail) recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        print(line)
        ACCEPTANCE.append((number, ok, line))
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
