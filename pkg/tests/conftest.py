import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; the terminal summary prints them."""
    def _record(number, title, ok, detail):
        ACCEPTANCE[number] = (bool(ok), title, detail)
        print(f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}")
