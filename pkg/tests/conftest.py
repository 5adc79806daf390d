import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: verdict(criterion, passed, detail)."""
    def record(criterion, passed, detail=""):
        _VERDICTS[criterion] = (bool(passed), detail)
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_VERDICTS, key=lambda k: (len(k.split()[0]), k)):
        ok, detail = _VERDICTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
