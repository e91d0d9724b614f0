from __future__ import annotations

import pytest

from switchbench import fixtures as fx
from switchbench.smoothfit import solve


@pytest.fixture(scope="session")
def case1():
    return fx.gbm_case1()


@pytest.fixture(scope="session")
def case2():
    return fx.gbm_case2()


@pytest.fixture(scope="session")
def ou():
    return fx.ou_example()


@pytest.fixture(scope="session")
def degenerate():
    return fx.degenerate()


@pytest.fixture(scope="session")
def sol1(case1):
    return solve(case1)


@pytest.fixture(scope="session")
def sol2(case2):
    return solve(case2)


@pytest.fixture(scope="session")
def sol_ou(ou):
    return solve(ou)


@pytest.fixture(scope="session")
def sol_degenerate(degenerate):
    return solve(degenerate)


_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    entry = _CRITERIA.setdefault(mark.args[0], {"passed": 0, "failed": [], "skipped": 0})
    if rep.failed:
        entry["failed"].append(item.name)
    elif rep.skipped:
        entry["skipped"] += 1
    elif rep.when == "call":
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "FAIL" if e["failed"] else ("SKIP" if not e["passed"] else "PASS")
        extra = f" ({', '.join(e['failed'])})" if e["failed"] else ""
        terminalreporter.write_line(f"CRITERION {n}: {status} [{e['passed']} passed, "
                                    f"{len(e['failed'])} failed, {e['skipped']} skipped]{extra}")
