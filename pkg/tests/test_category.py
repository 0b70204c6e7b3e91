import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import axis_problems
from sheafopt.category import (
    Incompatible,
    IncompatibleFamily,
    LocalProblem,
    UnsolvedProblem,
    build_star,
    check_gluing,
    check_morphism,
    check_presheaf,
    in_F,
    in_F_star,
    meet,
)
from sheafopt.local_solver import solve_local
from sheafopt.polynomial import SparsePoly
from sheafopt.space import EmptyFeasibleSet, FeasibleSet, Subspace

x, y = SparsePoly.gens(2)
X_SEG = FeasibleSet.box(Subspace.axis(0, 2), [0], [1])


def test_segment_maps_into_triangle(example_triangle):
    sk, sj = example_triangle
    w = check_morphism(sk, sj)
    assert w.containment and w.restriction_equal and w.dim_leq and w.exists
    assert not check_morphism(sj, sk).exists


def test_identity_morphism(example_triangle):
    for s in example_triangle:
        w = check_morphism(s, s)
        assert w.containment and w.restriction_equal and w.dim_leq


def test_constant_offset_breaks_restriction():
    sk = LocalProblem("k", X_SEG, x)
    sj = LocalProblem("j", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), x + 1)
    w = check_morphism(sk, sj)
    assert w.containment and not w.restriction_equal and not w.exists


def test_meet_examples(example_triangle):
    sk, sj = example_triangle
    m = meet(sk, sj)
    assert isinstance(m, LocalProblem)
    assert m.carrier.equals(Subspace.axis(0, 2))
    rng = np.random.default_rng(0)
    for p in rng.uniform(-0.5, 1.5, size=(500, 2)):
        assert m.feasible.contains(p) == (sk.feasible.contains(p) and sj.feasible.contains(p))
    assert meet(sk, sk) is sk
    bad = meet(LocalProblem("a", X_SEG, x), LocalProblem("b", X_SEG, 2 * x))
    assert isinstance(bad, Incompatible) and bad.pair == ("a", "b")


def test_meet_of_disjoint_sets_raises():
    far = FeasibleSet.box(Subspace.axis(0, 2), [2], [3])
    with pytest.raises(EmptyFeasibleSet):
        meet(LocalProblem("a", X_SEG, x), LocalProblem("b", far, x))


def test_build_star_examples(example_triangle):
    sk, sj = example_triangle
    star = build_star([sk, sj])
    assert star.top == "j"
    assert len(star.solutions) == 1 and np.allclose(star.solutions[0], (0, 1))
    assert star.problem.id == "j"
    single = build_star([sk])
    assert single.top == "k" and np.allclose(single.solutions[0], sk.solutions[0])
    # idempotent
    again = build_star([star.problem])
    assert np.allclose(again.solutions[0], star.solutions[0]) and again.top == "j"


def test_build_star_conflict_has_witness():
    a = solve_local(LocalProblem("a", X_SEG, x))
    b = solve_local(LocalProblem("b", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), x + y * y + 1))
    res = build_star([a, b])
    assert isinstance(res, Incompatible) and res.point is not None
    assert abs(float(a.utility.eval(res.point)) - float(b.utility.eval(res.point))) > 1e-9


def test_in_F_examples(example_triangle):
    sk, sj = example_triangle
    assert in_F((0, 1), sj)
    assert in_F(sk.solutions[0], sk) and in_F(sj.solutions[0], sj)
    assert not in_F((0, 0), sk)
    assert in_F((1, 5), sk)


def test_in_F_requires_solution():
    with pytest.raises(UnsolvedProblem):
        in_F((0, 0), LocalProblem("k", X_SEG, x))


def test_in_F_ignores_solution_order():
    t = SparsePoly.gens(1)[0]
    F = FeasibleSet.box(Subspace.full(1), [-1], [1])
    s = solve_local(LocalProblem("tie", F, t * t))
    r = s.with_solutions(tuple(reversed(s.solutions)), s.certificate)
    for p in np.linspace(-2, 2, 41):
        assert in_F([p], s) == in_F([p], r)


def test_presheaf_on_global_domain(example_triangle):
    sk, sj = example_triangle
    rep = check_presheaf(sk, sj, samples=10_000, domain=sj.feasible, seed=0)
    assert rep.verdict and rep.violations == 0 and rep.details["points"] == 10_000


def test_presheaf_outside_global_domain_fails(example_triangle):
    # off the triangle Γ_j is a projection onto it, so points far above the
    # apex land on (0, 1) while their x-axis projection can be anywhere
    sk, sj = example_triangle
    rep = check_presheaf(sk, sj, samples=10_000, box=([-2, -2], [2, 2]), seed=0)
    assert not rep.verdict and rep.violations > 0


def test_presheaf_apex_is_a_boundary_counterexample(example_triangle):
    # the apex (0, 1) is optimal for the triangle, its x-axis shadow (0, 0)
    # is not optimal for the segment
    sk, sj = example_triangle
    rep = check_presheaf(sk, sj, samples=10_000, domain=sj.feasible, targeted=True)
    assert rep.violations == 2
    assert all(np.allclose(c, (0, 1)) for c in rep.counterexamples)


def test_presheaf_self_and_corrupted(example_triangle):
    sk, sj = example_triangle
    assert check_presheaf(sj, sj, samples=2000, domain=sj.feasible).violations == 0
    p1, _ = axis_problems()
    full = solve_local(LocalProblem("full", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), p1.utility))
    assert check_presheaf(p1, full, samples=2000, domain=full.feasible, targeted=True).verdict
    wrong = p1.with_solutions((np.array([0.3, 0.0]),))
    rep = check_presheaf(wrong, full, samples=2000, domain=full.feasible, targeted=True)
    assert not rep.verdict
    assert np.allclose(rep.counterexamples[0], (0.5, 1))


def test_gluing_single_problem_holds(example_triangle):
    rep = check_gluing([example_triangle[1]], samples=2000, domain=example_triangle[1].feasible)
    assert rep.verdict


def test_gluing_triangle_family_apex_counterexample(example_triangle):
    sk, sj = example_triangle
    star = build_star([sk, sj])
    assert in_F_star((0, 1), star)
    uniform = check_gluing([sk, sj], samples=10_000, domain=sj.feasible, targeted=False)
    assert uniform.verdict
    # with boundary points the apex is in F(s*) but not in F(s^k)
    targeted = check_gluing([sk, sj], samples=10_000, domain=sj.feasible)
    assert not targeted.verdict
    assert all(np.allclose(c, (0, 1)) for c in targeted.counterexamples)


def test_gluing_perturbed_solution_fails():
    p1, p2 = axis_problems()
    full = solve_local(LocalProblem("full", FeasibleSet.box(Subspace.full(2), [0, 0], [1, 1]), p1.utility))
    dom = full.feasible
    assert check_gluing([p1, full], samples=3000, domain=dom).verdict
    moved = full.with_solutions((full.solutions[0] + np.array([-0.1, 0.0]),))
    rep = check_gluing([p1, moved], samples=3000, domain=dom)
    assert not rep.verdict and rep.counterexamples


def test_gluing_incompatible_family_raises():
    a = solve_local(LocalProblem("a", X_SEG, x))
    b = solve_local(LocalProblem("b", X_SEG, 2 * x))
    with pytest.raises(IncompatibleFamily):
        check_gluing([a, b], samples=10)


def test_report_serialization(example_triangle):
    d = check_presheaf(*example_triangle, samples=50, domain=example_triangle[1].feasible, seed=7).to_dict()
    assert set(d) == {"check", "verdict", "counterexamples", "seed", "samples"}
    assert d["seed"] == 7 and d["samples"] == 50


@st.composite
def nested_boxes(draw):
    a = draw(st.floats(-1, 0))
    b = draw(st.floats(0.1, 1))
    grow = draw(st.lists(st.floats(0, 1), min_size=4, max_size=4))
    return a, b, grow


@settings(max_examples=60, deadline=None)
@given(nested_boxes())
def test_morphisms_compose(data):
    a, b, g = data
    U = 1 - x * x + x * y - y * y
    k = LocalProblem("k", FeasibleSet.box(Subspace.axis(0, 2), [a], [b]), U)
    j = LocalProblem("j", FeasibleSet.box(Subspace.full(2), [a - g[0], -g[1]], [b + g[2], g[3]]), U)
    l_ = LocalProblem("l", FeasibleSet.box(Subspace.full(2), [a - g[0] - 1, -g[1] - 1], [b + g[2] + 1, g[3] + 1]), U)
    assert check_morphism(k, j).exists and check_morphism(j, l_).exists
    assert check_morphism(k, l_).exists


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.0), st.integers(0, 1000))
def test_morphism_gives_monotone_valuation(h, seed):
    U = 3 - x * x - y * y + 2 * y + x
    big = solve_local(LocalProblem("j", FeasibleSet.box(Subspace.full(2), [0, 0], [1, h]), U))
    small = solve_local(LocalProblem("k", FeasibleSet.box(Subspace.full(2), [0, 0], [1, h / 2]), U))
    assert check_morphism(small, big).exists
    assert check_presheaf(small, big, samples=300, domain=big.feasible, seed=seed).verdict
