import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    entry = _CRITERIA.setdefault(cid, {"title": title, "ok": True, "notes": []})
    failed = report.failed or hasattr(report, "wasxfail")
    if report.when == "call" or failed or report.skipped:
        if failed or report.skipped:
            entry["ok"] = False
        if hasattr(report, "wasxfail"):
            entry["notes"].append("expected failure: " + report.wasxfail)
        for key, value in item.user_properties:
            if key == "detail" and value not in entry["notes"]:
                entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        e = _CRITERIA[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}")
        for note in e["notes"]:
            terminalreporter.write_line(f"     {note}")
