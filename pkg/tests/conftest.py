import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; returns the flag."""
    def record(label, ok, measured):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {measured}"
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
