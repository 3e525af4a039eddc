import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from helpers import worked_example_events  # noqa: E402

from genealogy.corpus import build_index  # noqa: E402

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    entry = _criteria.setdefault(n, {"title": title, "passed": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed or (report.when == "call" and report.skipped):
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        c = _criteria[n]
        status = "PASS" if c["passed"] and c["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {c['title']} ({c['tests']} tests)")


@pytest.fixture
def worked_example_index():
    return build_index(worked_example_events())


@pytest.fixture
def worked_example_extended_index():
    return build_index(worked_example_events(extra_members=10))
