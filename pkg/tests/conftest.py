import re
import time

import pytest

VERDICTS = []
_START = time.perf_counter()


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion, then assert it."""

    def record(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        VERDICTS.append((str(criterion), line))
        print(line)
        assert ok, line

    return record


def _order(item):
    num, rest = re.match(r"(\d+)(.*)", item[0]).groups()
    return int(num), rest


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(VERDICTS, key=_order):
        terminalreporter.write_line(line)
    wall = time.perf_counter() - _START
    tag = "PASS" if wall < 300 else "FAIL"
    terminalreporter.write_line(f"[{tag}] criterion 10 (suite wall-clock): {wall:.0f} s (< 300 s)")
