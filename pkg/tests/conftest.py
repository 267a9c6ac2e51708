"""Print one PASS/FAIL line per acceptance criterion at the end of a run."""

import re

_OUTCOMES = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2).replace("_", " "))
    if report.when == "call" or report.outcome != "passed":
        prev = _OUTCOMES.get(key)
        if prev != "FAIL":
            _OUTCOMES[key] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), verdict in sorted(_OUTCOMES.items()):
        terminalreporter.write_line(f"criterion {num:2d} [{verdict}] {title}")
