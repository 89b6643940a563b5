"""Shared fixtures and the per-criterion PASS/FAIL summary."""
import re

import numpy as np
import pytest

from fabgmres import SparseMatrix

_CRITERION = re.compile(r"test_criterion_(\d+)")


def dense_problem(m, n, rank, seed):
    """Consistent rank-deficient dense system with its minimum-norm solution."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))
    b = M @ rng.standard_normal(n)
    return SparseMatrix.from_dense(M), b, np.linalg.pinv(M) @ b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._criterion_outcomes = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match or "test_acceptance" not in report.nodeid:
        return
    outcomes = _config_ref["config"]._criterion_outcomes
    num = int(match.group(1))
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or report.failed:
        outcomes[num] = outcomes.get(num, True) and not failed


_config_ref = {}


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    _config_ref["config"] = session.config


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = getattr(config, "_criterion_outcomes", {})
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if outcomes[num] else 'FAIL'}")
