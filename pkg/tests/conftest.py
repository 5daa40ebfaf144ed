"""Shared pytest hooks: one summary line per acceptance criterion."""

import pytest

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, label = mark.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    prev = _ACCEPTANCE.get(number, (label, True, 0.0))
    _ACCEPTANCE[number] = (label, prev[1] and not failed, prev[2] + call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        label, ok, secs = _ACCEPTANCE[number]
        tr.write_line(f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {label}  "
                      f"({secs:.1f} s)")
