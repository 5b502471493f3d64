from __future__ import annotations

import pytest

_criteria: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = getattr(report, "criterion", None)
    if number is None:
        return
    outcome = "PASS" if report.outcome == "passed" else "FAIL"
    _criteria.setdefault(number, []).append((report.nodeid.split("::")[-1], outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _criteria[number]
        status = "PASS" if all(o == "PASS" for _, o in results) else "FAIL"
        names = ", ".join(name for name, _ in results)
        terminalreporter.write_line(f"criterion {number:2d}: {status}  ({names})")
