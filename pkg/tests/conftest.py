from __future__ import annotations

import sys
from pathlib import Path

import pytest

# the shared oracles in helpers.py live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is None:
        return
    number, title = m.args
    # a setup error counts too, but the call phase has the final word
    if report.when == "call" or (report.failed and number not in _RESULTS):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        _RESULTS[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
