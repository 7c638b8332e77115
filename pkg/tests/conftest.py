import pytest

# acceptance criterion -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def record_criterion():
    def record(name, ok, detail):
        ACCEPTANCE[name] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    return record
