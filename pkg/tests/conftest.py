import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kobalab import domains as dm

settings.register_profile("kobalab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kobalab")


def square_hull(dim: int) -> dm.FunctionalHull:
    """The product of dim squares [-1, 1]^2, as a hull with 4 dim facets."""
    fs = []
    for j in range(dim):
        for u in (1, -1, 1j, -1j):
            n = np.zeros(dim, dtype=complex)
            n[j] = u
            fs.append(dm.SupportFunctional(tuple(n), 1.0))
    return dm.FunctionalHull(dim, tuple(fs), tuple(np.zeros(dim)))


MODELS = [dm.disc(), dm.Ball(2), dm.Ball(3), dm.Polydisc(2), dm.Polydisc(3),
          dm.Product((dm.Ball(2), dm.Ball(1))), dm.Product((dm.Polydisc(2), dm.Ball(2)))]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- one summary line per acceptance criterion ---------------------------------------

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and (report.when == "call" or report.outcome != "passed"):
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome.upper(), report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, secs in _ACCEPTANCE:
        verdict = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}  ({secs:.2f} s)")
