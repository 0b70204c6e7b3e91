from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafopt.polynomial import SparsePoly, gradient, poly_equal, restrict
from sheafopt.space import Subspace

x, y = SparsePoly.gens(2)
U = 3 - x * x - y * y + 2 * y + x


def test_eval_examples():
    assert U.eval([Fraction(1, 2), 1]) == Fraction(17, 4)
    assert SparsePoly.zero(2).eval([5, 7]) == 0
    assert x.eval([1, 0]) == 1


def test_restrict_examples():
    t = SparsePoly.gens(1)[0]
    assert restrict(U, Subspace.axis(0, 2)) == 3 - t * t + t
    assert restrict(U, Subspace.axis(1, 2)) == 3 - t * t + 2 * t
    assert restrict(U, Subspace.full(2)) == U


def test_restrict_irrational_basis_is_float():
    r = restrict(U, Subspace([[1, 1]]))
    assert not r.exact
    s = 2 ** -0.5
    assert abs(r.eval([1.0]) - float(U.eval([s, s]))) < 1e-12


def test_poly_equal_examples():
    assert poly_equal(U, U)
    assert poly_equal(x + y, y + x)
    assert not poly_equal(x.to_float(), x.to_float() + 1e-6, tol=1e-9)


def test_gradient_examples():
    t = SparsePoly.gens(1)[0]
    (g,) = gradient(3 - t * t + t)
    assert g == 1 - 2 * t
    assert g.eval([Fraction(1, 2)]) == 0
    assert all(gi.is_zero() for gi in gradient(SparsePoly.constant(5, 2)))
    assert gradient(x * x * y) == [2 * x * y, x * x]


def test_degree_and_zero():
    assert SparsePoly.zero(2).degree() == float("-inf")
    assert SparsePoly.constant(3, 2).degree() == 0
    assert SparsePoly({(0, 0): 0, (1, 0): 2}, 2).terms == {(1, 0): 2}


def test_backends_do_not_mix():
    with pytest.raises(TypeError):
        x + x.to_float()


def test_json_round_trip_exact():
    p = x * Fraction(1, 3) - y * y * Fraction(7, 11) + 5
    assert SparsePoly.from_json(p.to_json(), 2) == p
    q = p.to_float()
    assert SparsePoly.from_json(q.to_json(), 2) == q


small = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def polys(draw, nvars=2, max_terms=4):
    terms = draw(st.lists(st.tuples(st.tuples(*[st.integers(0, 2)] * nvars), small), max_size=max_terms))
    return SparsePoly(terms, nvars, True)


@settings(max_examples=100, deadline=None)
@given(polys(), polys(), polys())
def test_distributive_exact(p, q, r):
    assert (p + q) * r == p * r + q * r


@settings(max_examples=60, deadline=None)
@given(polys(3), st.lists(st.floats(-1, 1), min_size=1, max_size=1))
def test_restrict_is_transitive(p, _):
    big = Subspace([[1, 0, 0], [0, 1, 0]])
    small_in_big = Subspace([[1, 0]])
    small = Subspace([[1, 0, 0]])
    assert restrict(restrict(p, big), small_in_big) == restrict(p, small)


@settings(max_examples=50, deadline=None)
@given(polys(2), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_gradient_matches_finite_differences(p, pt):
    pf = p.to_float()
    pt = np.array(pt)
    h = 1e-6
    for i, g in enumerate(pf.gradient()):
        e = np.zeros(2)
        e[i] = h
        fd = (pf.eval(pt + e) - pf.eval(pt - e)) / (2 * h)
        assert abs(fd - g.eval(pt)) <= 1e-6 * max(1.0, abs(fd)) + 1e-6


@settings(max_examples=50, deadline=None)
@given(polys(3), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_eval_restrict_consistency(p, t):
    S = Subspace([[1, 2, 0], [0, 1, -1]])
    q = restrict(p, S)
    assert abs(float(q.eval(t)) - float(p.to_float().eval(S.embed(t)))) <= 1e-9 * max(1.0, p.max_abs_coeff()) * 50
