import numpy as np
import pytest

from sheafopt.category import LocalProblem
from sheafopt.local_solver import solve_local
from sheafopt.polynomial import SparsePoly, squared_distance_poly
from sheafopt.space import FeasibleSet, Subspace

ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


def two_axes_utility():
    x, y = SparsePoly.gens(2)
    return 3 - x * x - y * y + 2 * y + x


@pytest.fixture
def U2():
    return two_axes_utility()


def axis_problems(U=None, solve=True):
    U = two_axes_utility() if U is None else U
    p1 = LocalProblem("x-axis", FeasibleSet.box(Subspace.axis(0, 2), [0], [1]), U)
    p2 = LocalProblem("y-axis", FeasibleSet.box(Subspace.axis(1, 2), [0], [1]), U)
    if solve:
        p1, p2 = solve_local(p1), solve_local(p2)
    return p1, p2


@pytest.fixture
def axes():
    return axis_problems()


def segment_and_triangle(solve=True):
    x, y = SparsePoly.gens(2)
    sk = LocalProblem("k", FeasibleSet.box(Subspace.axis(0, 2), [0], [1]), x)
    tri = FeasibleSet.polytope(Subspace.full(2), np.array([[-1.0, 0], [0, -1], [1, 1]]), [0, 0, 1])
    sj = LocalProblem("j", tri, x + 2 * y)
    if solve:
        sk, sj = solve_local(sk), solve_local(sj)
    return sk, sj


@pytest.fixture
def example_triangle():
    return segment_and_triangle()


def three_peak_planes():
    """Two planes through a common line holding three tied maxima."""
    U = SparsePoly.constant(-1, 3)
    for c in ([-1, -1, 0], [0, 0, 0], [1, 1, 0]):
        U = U * squared_distance_poly(c)
    P1 = LocalProblem("xy", FeasibleSet.box(Subspace([[1, 0, 0], [0, 1, 0]]), [-1.5, -1.5], [1.5, 1.5]), U)
    P3 = LocalProblem("diag-z", FeasibleSet.box(Subspace([[1, 1, 0], [0, 0, 1]]), [-2, -1], [2, 1]), U)
    return solve_local(P1), solve_local(P3)


def axes_scenario(cover: bool = True):
    """Axis problems, then (optionally) the full unit square."""
    U = two_axes_utility()
    region = FeasibleSet.box(Subspace.full(2), [-0.5, -0.5], [1.5, 1.5])
    seq = list(axis_problems(U, solve=False))
    if cover:
        seq.append(LocalProblem("square", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), U))
    return U, region, seq
