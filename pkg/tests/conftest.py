import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(capsys):
    """Record one acceptance line; the summary prints them all in order."""

    def record(number, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"criterion {number:>2}: {status}  {detail}".rstrip()
        _CRITERIA.setdefault(number, []).append(line)
        with capsys.disabled():
            print(f"\n  {line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        for line in _CRITERIA[number]:
            terminalreporter.write_line(line)
