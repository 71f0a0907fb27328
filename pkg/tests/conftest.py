import os
import re

import numpy as np
import pytest

from riloss import _backend

BACKENDS = ["numpy", "numba"] if _backend.HAVE_NUMBA else ["numpy"]

_results = []


def pytest_addoption(parser):
    parser.addoption("--acknowledge-datasets", action="store_true", default=False,
                     help="run criteria that need manually downloaded benchmark CSVs "
                          "(directory from RILOSS_DATA_DIR, default ./data)")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", str(m.args[0])))


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _backend.use(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir(request):
    if not request.config.getoption("--acknowledge-datasets"):
        pytest.skip("benchmark datasets not acknowledged (pass --acknowledge-datasets)")
    return os.environ.get("RILOSS_DATA_DIR", "data")


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _results.append((crit, status, report.nodeid.split("::")[-1]))


def _key(label):
    m = re.match(r"(\d+)(.*)", label)
    return (int(m.group(1)), m.group(2)) if m else (10**6, label)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, name in sorted(_results, key=lambda r: _key(r[0])):
        terminalreporter.write_line(f"[{status}] criterion {crit:<3} {name}")
