"""Shared fixtures and the per-criterion pass/fail report."""

from __future__ import annotations

import pytest

_CRITERIA: dict[str, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, text = marker.args
    entry = _CRITERIA.setdefault(cid, {"text": text, "failed": False, "ran": False})
    if call.when == "call" or call.excinfo is not None:
        entry["ran"] = True
        if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
            entry["failed"] = True


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: [int(p) if p.isdigit() else p for p in c.replace("(", ".").replace(")", "").split(".")]):
        entry = _CRITERIA[cid]
        status = "FAIL" if entry["failed"] else ("PASS" if entry["ran"] else "NOT RUN")
        terminalreporter.write_line(f"{status}  criterion {cid}: {entry['text']}")
