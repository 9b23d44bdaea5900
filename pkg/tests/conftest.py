import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion; printed after the run."""

    def record(key: str, passed: bool, detail: str):
        _ACCEPTANCE[key] = f"[{'PASS' if passed else 'FAIL'}] {key}: {detail}"
        print(_ACCEPTANCE[key])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(_ACCEPTANCE[key])
