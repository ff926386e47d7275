import numpy as np
import pytest

from quadioc.systems import builtin_system

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=["example1-discrete", "scalar-discrete-half"])
def discrete_sys(request):
    return builtin_system(request.param)


@pytest.fixture(params=["example2-continuous", "scalar-continuous-neg"])
def continuous_sys(request):
    return builtin_system(request.param)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
