import os
import sys
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from vopt.model import load_problem

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def data_path(name):
    return str(resources.files("vopt") / "data" / f"{name}.json")


@pytest.fixture(scope="session")
def problems():
    return {name: load_problem(data_path(name)) for name in ("disc", "ellipsoid", "triobjective", "portfolio")}


@pytest.fixture(scope="session")
def disc(problems):
    return problems["disc"]


C1_RAYS = ((1.0, 2.0), (2.0, 1.0))


@pytest.fixture(scope="session")
def run_solver(problems):
    """``run_solver(name, algorithm, cone_rays=None, **options)``, memoised per session.

    The slow fixture runs are shared between the module tests and the
    acceptance suite; the wall time of the first call is kept on the result.
    """
    from vopt.cone import cone_from_rays
    from vopt.engine import SolveOptions, solve

    memo = {}

    def run(name, algorithm="movs", cone_rays=None, **options):
        key = (name, algorithm, cone_rays, tuple(sorted(options.items())))
        if key not in memo:
            p = problems[name]
            if cone_rays is not None:
                p = p.with_cone(cone_from_rays(cone_rays))
            memo[key] = solve(p, SolveOptions(algorithm=algorithm, **options))
        return memo[key]

    return run


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Merge a check into the line for ``number``; a criterion passes only if all its checks do."""
    ok, details = ACCEPTANCE.get(number, (True, []))
    ACCEPTANCE[number] = (ok and bool(passed), details + [detail])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, details = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  " + "; ".join(details))
