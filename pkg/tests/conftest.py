import numpy as np
import pytest

from pointtrack.params import init_weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def weights_b():
    return init_weights("B", seed=0)


@pytest.fixture(scope="session")
def weights_s():
    return init_weights("S", seed=0)


# ---------------------------------------------------------------------------
# One PASS/FAIL line per acceptance criterion
# ---------------------------------------------------------------------------

_criteria: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcomes = _criteria[n]
        status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status} ({sum(outcomes)}/{len(outcomes)} tests)")
