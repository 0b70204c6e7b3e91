from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafopt.category import LocalProblem
from sheafopt.concave import GlueInput, check_separability, glue, glue_quality
from sheafopt.local_solver import solve_local
from sheafopt.polynomial import SparsePoly
from sheafopt.space import FeasibleSet, Subspace

x, y = SparsePoly.gens(2)


def test_axes_glue_to_half_one(axes, U2):
    res = glue(axes, utility=U2)
    assert np.allclose(res.point, (0.5, 1.0), atol=1e-12)
    assert res.residual <= 1e-12
    assert res.status == "exact_point"
    assert res.restriction_hypothesis is True
    assert glue_quality(res.point, axes) == pytest.approx([0, 0], abs=1e-12)


def test_single_full_problem_returns_its_solution(U2):
    p = solve_local(LocalProblem("full", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), U2))
    res = glue([p])
    assert np.allclose(res.point, p.solutions[0]) and res.status == "exact_point"


def separable_axes_problems(a, b, lo, hi):
    """``Σ -a_i x_i² + b_i x_i`` with one box problem per coordinate axis."""
    n = len(a)
    xs = SparsePoly.gens(n)
    U = SparsePoly.zero(n)
    for i in range(n):
        U = U - xs[i] * xs[i] * a[i] + xs[i] * b[i]
    probs = [solve_local(LocalProblem(f"e{i}", FeasibleSet.box(Subspace.axis(i, n), [lo[i]], [hi[i]]), U))
             for i in range(n)]
    return U, probs


def test_three_axes_separable():
    a, b = [1, 2, Fraction(1, 2)], [1, -2, 3]
    lo, hi = [-1, -1, -1], [1, 1, 1]
    U, probs = separable_axes_problems(a, b, lo, hi)
    res = glue(probs, utility=U)
    # vertex of each parabola, clipped to its interval
    expected = [min(max(Fraction(bi) / (2 * ai), l), h) for ai, bi, l, h in zip(a, b, lo, hi)]
    assert np.allclose(res.point, [float(v) for v in expected], atol=1e-12)
    assert res.status == "exact_point"
    grid = np.linspace(-1, 1, 201)
    G = np.stack(np.meshgrid(grid, grid, grid, indexing="ij"), -1).reshape(-1, 3)
    best = G[np.argmax(U.to_float().eval_many(G))]
    assert np.allclose(best, res.point, atol=1e-2)


def test_separability_examples(U2):
    assert check_separability(U2, Subspace.axis(0, 2))
    assert not check_separability(x * y, Subspace.axis(0, 2))
    assert check_separability(x * y + x ** 3, Subspace.full(2))
    # x² + y² is rotation invariant, so it splits along the diagonal
    assert check_separability(x * x + y * y, Subspace([[1, 1]]))
    assert not check_separability(x * x + 2 * y * y, Subspace([[1, 1]]))


def test_quality_reports_perturbation(axes):
    p1, p2 = axes
    moved = p1.with_solutions((p1.solutions[0] + np.array([0.1, 0.0]),))
    d = glue_quality(np.array([0.5, 1.0]), [moved, p2])
    assert d[0] == pytest.approx(0.1) and d[1] == pytest.approx(0.0)


def test_underdetermined_still_reports_distances(axes):
    p1, _ = axes
    res = glue([p1])
    assert res.status == "underdetermined" and res.affine.dim == 1
    assert np.allclose(res.point, (0.5, 0))
    assert glue_quality(res.point, [p1]) == pytest.approx([0.0], abs=1e-12)


def test_inconsistent_returns_least_squares(axes, U2):
    p1, p2 = axes
    full = LocalProblem("full", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), U2)
    full = full.with_solutions((np.array([0.7, 1.0]),))
    res = glue([p1, p2, full])
    assert res.status == "inconsistent" and res.residual > 0
    assert np.allclose(res.point, (0.6, 1.0), atol=1e-9)


def test_zero_solution_accepted_by_rank_test():
    U = -(x * x) - y * y + 2 * y
    p1 = solve_local(LocalProblem("x", FeasibleSet.box(Subspace.axis(0, 2), [-1], [1]), U))
    p2 = solve_local(LocalProblem("y", FeasibleSet.box(Subspace.axis(1, 2), [-1], [1]), U))
    res = glue([p1, p2])
    assert not res.solutions_span and res.informative_by == "constraint-rank"
    assert np.allclose(res.point, (0, 1))


def test_glue_input_rejects_multiple_solutions():
    t2 = x * x
    p = solve_local(LocalProblem("tie", FeasibleSet.box(Subspace.axis(0, 2), [-1], [1]), t2))
    with pytest.raises(ValueError):
        GlueInput.from_problems([p])


def test_report_has_per_problem_distances(axes):
    d = glue(axes).to_dict(axes)
    assert d["status"] == "exact_point" and d["per_k_distances"] == pytest.approx([0, 0], abs=1e-12)


coef = st.fractions(min_value=Fraction(1, 4), max_value=3, max_denominator=4)
lin = st.fractions(min_value=-4, max_value=4, max_denominator=4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.lists(coef, min_size=n, max_size=n),
                                                       st.lists(lin, min_size=n, max_size=n))))
def test_separable_glue_is_global_argmax(ab):
    a, b = ab
    n = len(a)
    lo, hi = [-1] * n, [1] * n
    U, probs = separable_axes_problems(a, b, lo, hi)
    assert all(check_separability(U, Subspace.axis(i, n)) for i in range(n))
    res = glue(probs)
    expected = [float(min(max(bi / (2 * ai), -1), 1)) for ai, bi in zip(a, b)]
    assert np.allclose(res.point, expected, atol=1e-9)


def random_rotation(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_glue_rotation_equivariant(seed):
    rng = np.random.default_rng(seed)
    n = 3
    target = rng.uniform(-1, 1, n)
    Q = random_rotation(rng, n)
    blocks = [[0], [1, 2]]

    def problems(M):
        out = []
        for i, idx in enumerate(blocks):
            S = Subspace([M[:, j] for j in idx])
            sol = S.projector @ (M @ target)
            F = FeasibleSet.box(S, [-5] * S.dim, [5] * S.dim)
            out.append(LocalProblem(f"b{i}", F, SparsePoly.zero(n).to_float()).with_solutions((sol,)))
        return out

    base = glue(problems(np.eye(n))).point
    rotated = glue(problems(Q)).point
    assert np.allclose(Q @ base, rotated, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(3)))
def test_glue_order_independent(perm):
    a, b = [1, 2, 3], [1, 1, 1]
    _, probs = separable_axes_problems(a, b, [-1] * 3, [1] * 3)
    base = glue(probs).point
    assert np.allclose(glue([probs[i] for i in perm]).point, base, atol=1e-12)
