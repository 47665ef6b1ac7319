import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one acceptance criterion's outcome; the terminal summary prints every line."""

    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{number:2d}] {title}: {detail}")
