import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, passed, detail)``."""

    def record(number, passed, detail):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        _VERDICTS[number] = f"criterion {number:2d} {status}: {detail}"
        print(_VERDICTS[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
