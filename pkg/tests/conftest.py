import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_criteria = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        n = int(report.nodeid.split("test_criterion_")[1][:2])
        line = next((l for l in report.capstdout.splitlines() if l.startswith("criterion ")), "")
        _criteria[n] = line or f"criterion {n}: {'PASS' if report.passed else 'FAIL'}"


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_criteria):
            terminalreporter.write_line(_criteria[n])
