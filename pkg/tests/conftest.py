import re
from collections import defaultdict

_CRITERIA: dict[int, list[str]] = defaultdict(list)
_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if m and (report.when == "call" or report.outcome != "passed"):
        _CRITERIA[int(m.group(1))].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok = all(o == "passed" for o in _CRITERIA[n])
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
