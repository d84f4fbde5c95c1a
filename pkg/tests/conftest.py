"""Per-criterion PASS/FAIL summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n, "title")`` are grouped by ``n``;
a criterion passes when every test in its group passes. Measurements added
with the ``record_property`` fixture are echoed next to the verdict.
"""

from collections import defaultdict

import pytest

_results: dict[int, dict] = defaultdict(lambda: {"title": "", "ok": True, "notes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _results[n]
    entry["title"] = title
    if rep.when == "call" or rep.failed:
        entry["ok"] &= rep.passed
    if rep.when == "call":
        entry["notes"].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        e = _results[n]
        verdict = "PASS" if e["ok"] else "FAIL"
        notes = f"  [{', '.join(e['notes'])}]" if e["notes"] else ""
        terminalreporter.write_line(f"criterion {n}: {verdict}  {e['title']}{notes}")
