import pytest

import jitmpi
from helpers import UNDER_MPIEXEC

RANK = int(jitmpi.rank())
RANKS = int(jitmpi.size())

# tests that spawn their own mpiexec must not run nested inside one
launcher_only = pytest.mark.skipif(
    UNDER_MPIEXEC or RANKS > 1,
    reason="spawns mpiexec; run from a plain (non-mpiexec) pytest invocation",
)

needs_two_ranks = pytest.mark.skipif(RANKS < 2, reason="needs >= 2 ranks")


@pytest.fixture(autouse=True)
def no_leaked_staging():
    yield
    assert jitmpi.staging_count() == 0, "a test leaked isend staging buffers"


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\n[{name}] {verdict}", flush=True)
