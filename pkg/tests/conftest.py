import os
import sys

import pytest

# keep thread pools small and deterministic in the suite
os.environ.setdefault("XLOS_WORKERS", "1")

_REPORT = []


def record(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    _REPORT.append(line)
    print(line, file=sys.__stdout__, flush=True)
    return ok


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
