"""Shared, session-cached solves.

The full-size grids take seconds each on one core, so every expensive
solve is computed once per test session and shared read-only.
"""

import math

import pytest

from amput.canonical import CanonicalParams, MarketParams
from amput.obstacle import GridSpec, extract_boundary, solve

PUT = CanonicalParams(rho=0.0, theta=1.0)
CRITERION_GRID = dict(h=2.5e-3, dt=5e-4, t_max=8.0)
REFINEMENT_LEVELS = [(5e-3, 1e-3), (2.5e-3, 5e-4), (1.25e-3, 2.5e-4)]

_cache = {}


def cached_solution(p, h, dt, t_max):
    key = (p, h, dt, t_max)
    if key not in _cache:
        sol = solve(p, GridSpec.build(p, h=h, dt=dt, t_max=t_max))
        _cache[key] = (sol, extract_boundary(sol))
    return _cache[key]


@pytest.fixture(scope="session")
def put_run():
    """(solution, curve) at rho=0, theta=1 on the reference grid."""
    return cached_solution(PUT, **CRITERION_GRID)


@pytest.fixture(scope="session")
def put_curve(put_run):
    return put_run[1]


@pytest.fixture(scope="session")
def refinement_curves():
    return [cached_solution(PUT, h, dt, 8.0)[1] for h, dt in REFINEMENT_LEVELS]


@pytest.fixture(scope="session")
def coarse_run():
    """Cheap solve for structural tests."""
    return cached_solution(PUT, 1e-2, 2e-3, 3.0)


@pytest.fixture(scope="session")
def lattice_run():
    """Solve covering t = 3 at the reference resolution for the tree comparison."""
    return cached_solution(PUT, 2.5e-3, 5e-4, 3.0)


@pytest.fixture(scope="session")
def unit_market():
    return MarketParams(r=1.0, sigma=math.sqrt(2.0))


_acceptance_lines = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line for an acceptance criterion and assert on it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _acceptance_lines.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_acceptance_lines):
        terminalreporter.write_line(line)
