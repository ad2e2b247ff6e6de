"""Shared fixtures and the acceptance summary.

Tests marked ``acceptance("name")`` are collected into one PASS/FAIL line per
criterion, printed at the end of the session. A criterion with several tests
passes only if all of them pass. Tests may attach a ``detail`` user property
(measured values, runtimes) that is printed next to the verdict.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): counts towards the named acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running experiment (deselect with -m 'not slow')")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when != "call" and not report.failed:
        return
    name = marker.args[0]
    entry = _RESULTS.setdefault(name, {"ok": True, "details": []})
    if report.failed:
        entry["ok"] = False
    if report.when == "call":
        entry["details"].extend(str(v) for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, entry in _RESULTS.items():
        verdict = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"{verdict}  {name}" + (f"  ({detail})" if detail else ""))
