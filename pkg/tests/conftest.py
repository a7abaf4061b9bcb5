import numpy as np
import pytest

from drpo.instances import SYNTHETIC_PRICES, data_path, load_instances
from drpo.market_data import build_scenario_set, empirical_moments, load_prices

_criteria = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    num, title = crit
    prev = _criteria.get(num, (title, "PASS"))
    failed = report.failed or (report.when == "call" and report.skipped)
    _criteria[num] = (title, "FAIL" if failed or prev[1] == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result()._criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")


@pytest.fixture(scope="session")
def instances():
    return load_instances()


@pytest.fixture(scope="session")
def synthetic():
    ps = load_prices(data_path(SYNTHETIC_PRICES))
    sc = build_scenario_set(ps)
    return ps, sc, empirical_moments(sc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
