import os
from collections import OrderedDict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXTENDED = os.environ.get("BDDC_LFA_EXTENDED") == "1"

# criterion number -> list of (nodeid, outcome)
_CRITERIA = OrderedDict()
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            num = m.args[0]
            _CRITERIA.setdefault(num, [])
            _TITLES[num] = m.args[1] if len(m.args) > 1 else ""
        if item.get_closest_marker("extended") and not EXTENDED:
            item.add_marker(pytest.mark.skip(reason="extended target; set BDDC_LFA_EXTENDED=1"))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and (report.failed or report.skipped)):
        return
    num = _criterion_of(report)
    if num is None:
        return
    outcome = "skipped" if report.skipped else ("failed" if report.failed else "passed")
    _CRITERIA[num].append((report.nodeid, outcome))


def _criterion_of(report):
    for key, value in report.user_properties:
        if key == "criterion":
            return value
    return None


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        results = _CRITERIA[num]
        ran = [o for _, o in results if o != "skipped"]
        if not results:
            status = "NOT RUN"
        elif any(o == "failed" for o in ran):
            status = "FAIL"
        elif ran:
            status = "PASS"
        else:
            status = "SKIPPED"
        skipped = sum(o == "skipped" for _, o in results)
        extra = f" ({len(ran)} checks" + (f", {skipped} extended skipped" if skipped else "") + ")"
        tr.write_line(f"criterion {num}: {status} - {_TITLES.get(num, '')}{extra}")
