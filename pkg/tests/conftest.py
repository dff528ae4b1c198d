"""Collects per-criterion outcomes of the acceptance suite and prints one
PASS/FAIL line per criterion at the end of the session."""
from collections import defaultdict

import pytest

_results: dict[int, list] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = marker.args
    _titles[number] = title
    details = [v for k, v in item.user_properties if k == "detail"]
    _results[number].append((rep.passed, item.name, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for number in sorted(_results):
        runs = _results[number]
        ok = all(passed for passed, _, _ in runs)
        tr.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {_titles[number]}")
        for passed, name, detail in runs:
            tr.write_line(f"      {'ok  ' if passed else 'FAIL'} {name}: {detail}")
