import os
from collections import OrderedDict

import pytest
import torch

torch.set_num_threads(1)
os.environ.setdefault("GANLAB_DEVICE", "cpu")

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            num, title = mark.args
            _CRITERIA.setdefault(num, {"title": title, "tests": {}})


def pytest_runtest_logreport(report):
    if report.when not in ("setup", "call") or "criterion" not in report.keywords:
        return
    for num, entry in _CRITERIA.items():
        if report.nodeid.split("::")[-1].startswith(f"test_criterion_{num}_"):
            prev = entry["tests"].get(report.nodeid)
            if report.failed or report.skipped:
                entry["tests"][report.nodeid] = "fail" if report.failed else "skip"
            elif prev is None and report.when == "call":
                entry["tests"][report.nodeid] = "pass"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outcomes = list(entry["tests"].values())
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "pass" for o in outcomes):
            status = "PASS"
        elif "fail" in outcomes:
            status = "FAIL"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"criterion {num}: {status:7s} {entry['title']} ({len(outcomes)} checks)")
