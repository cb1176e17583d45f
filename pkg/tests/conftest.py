import pytest

# filled by tests/test_acceptance.py: (number, title, passed, detail)
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num:>2}. {title}: {detail}")


@pytest.fixture
def record_criterion():
    def record(num, title, passed, detail=""):
        ACCEPTANCE_RESULTS.append((num, title, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {num:>2}. {title}: {detail}")
    return record
