import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = report.user_properties and dict(report.user_properties).get("criterion")
    if not n:
        return
    prev = _CRITERIA.get(n)
    ok = report.outcome == "passed"
    _CRITERIA[n] = ok if prev is None else (prev and ok)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        tr.write_line(f"ACCEPTANCE criterion {n:2d}: {'PASS' if _CRITERIA[n] else 'FAIL'}")
    passed = sum(_CRITERIA.values())
    tr.write_line(f"ACCEPTANCE {passed}/{len(_CRITERIA)} criteria passed")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240611)
