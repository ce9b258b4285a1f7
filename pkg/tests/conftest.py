import numpy as np
import pytest

CRITERIA = {
    1: "Grover amplitudes",
    2: "cross-engine equivalence",
    3: "compression monotonicity",
    4: "simplify cancellation",
    5: "slicing exactness",
    6: "noise algebra",
    7: "partial trace via tokens",
    8: "trajectory convergence",
    9: "PTM properties",
    10: "determinism",
}


def pytest_configure(config):
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n = mark.args[0]
    ok = item.config._criteria.get(n, True) and rep.passed
    item.config._criteria[n] = ok


def pytest_terminal_summary(terminalreporter, config):
    results = config._criteria
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status = "PASS" if results[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} [{status}] {CRITERIA.get(n, '')}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
