import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion and assert it."""
    def record(number, ok, detail):
        ACCEPTANCE[number] = ("PASS" if ok else "FAIL", detail)
        assert ok, f"criterion {number}: {detail}"
    return record


def skip_criterion(number, reason):
    ACCEPTANCE[number] = ("SKIP", reason)
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
