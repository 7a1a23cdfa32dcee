"""Shared fixtures plus a per-criterion verdict line for the acceptance
suite, printed after the normal summary."""
import re

import numpy as np
import pytest

import reference_nets as nets

_CRITERIA: dict[int, bool] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if m is None:
        return
    k = int(m.group(1))
    if report.failed:
        _CRITERIA[k] = False
    elif report.when == "call" and report.passed:
        _CRITERIA.setdefault(k, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        verdict = "PASS" if _CRITERIA[k] else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {verdict}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def gossip_net():
    return nets.gossip_net()


@pytest.fixture
def gossip_step():
    return nets.gossip_step()


@pytest.fixture
def gossip_trace():
    return nets.gossip_trace()
