"""Collects the outcome of each acceptance criterion and prints one line per criterion."""
import re

import pytest

_OUTCOME = {}
_NOTES = {}


def _criterion(nodeid):
    m = re.search(r"test_criterion_(\d+)", nodeid)
    return int(m.group(1)) if m else None


def pytest_runtest_logreport(report):
    n = _criterion(report.nodeid)
    if n is None:
        return
    if report.outcome == "failed":
        _OUTCOME[n] = "FAIL"
    elif report.when == "call" and _OUTCOME.get(n) != "FAIL":
        _OUTCOME[n] = "SKIP" if report.outcome == "skipped" else "PASS"
    elif report.outcome == "skipped":
        _OUTCOME.setdefault(n, "SKIP")


@pytest.fixture
def note(request):
    """``note("text")`` attaches measured values to the criterion's summary line."""
    n = _criterion(request.node.nodeid)

    def add(text):
        _NOTES.setdefault(n, []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOME:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOME):
        detail = "; ".join(_NOTES.get(n, []))
        terminalreporter.write_line(f"criterion {n:2d}: {_OUTCOME[n]}" + (f"  ({detail})" if detail else ""))
