import pytest

# criterion number -> (ok, detail, seconds); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, float]] = {}


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail, secs = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  ({secs:.1f} s)  {detail}")
