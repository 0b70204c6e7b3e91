from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sheafopt.arrangement import build_incidence, build_partition
from sheafopt.groebner import (
    POT,
    TOP,
    BoundaryRow,
    ModuleElement,
    ResourceCapExceeded,
    buchberger,
    degree_slice,
    is_groebner,
    kernel_check,
    kernel_generators,
    leading_term,
    reduce,
    s_vector,
    same_span,
    t_action,
)
from sheafopt.polynomial import SparsePoly
from sheafopt.space import Subspace
from sheafopt.surrogate import _kernel, continuity_system

x, y = SparsePoly.gens(2)
ONE2, ZERO2 = SparsePoly.constant(1, 2), SparsePoly.zero(2)


def vec(*comps):
    return ModuleElement.from_components(list(comps))


def test_leading_term_examples():
    assert leading_term(vec(x * x, y)) == (0, (2, 0), 1)
    assert leading_term(vec(ZERO2, y ** 3)) == (1, (0, 3), 1)
    assert leading_term(vec(x + y, ZERO2)) == (0, (1, 0), 1)
    with pytest.raises(ValueError):
        leading_term(vec(ZERO2, ZERO2))


def test_top_prefers_degree():
    assert leading_term(vec(x, y * y), TOP)[0] == 1
    assert leading_term(vec(x, y * y), POT)[0] == 0


def test_reduce_examples():
    g = vec(x + 1, y)
    assert reduce(g, [g]).is_zero()
    assert reduce(vec(x * x, x), [vec(x, ONE2)]).is_zero()
    e = vec(y, ZERO2)
    assert reduce(e, [vec(x, ZERO2)]) == e


def test_s_vector_needs_same_position():
    assert s_vector(vec(x, ZERO2), vec(ZERO2, y)) is None
    s = s_vector(vec(x, ZERO2), vec(y, ZERO2))
    assert s.is_zero()


def test_buchberger_examples():
    G = buchberger([vec(ONE2, ONE2)])
    assert G == [vec(ONE2, ONE2)]
    t = [vec(x), vec(y)]
    assert sorted(buchberger(t), key=repr) == sorted(t, key=repr)
    gens = [vec(x, ZERO2), vec(y, ZERO2), vec(ZERO2, ONE2)]
    G = buchberger(gens)
    assert is_groebner(G) and len(G) == 3


def test_buchberger_completes_non_basis():
    # x*y - 1 and y^2 - x need completion in grevlex
    G = buchberger([vec(x * y - 1), vec(y * y - x)])
    assert is_groebner(G)
    assert len(G) > 2
    for g in (vec(x * y - 1), vec(y * y - x)):
        assert reduce(g, G).is_zero()


def test_caps_enforced():
    z = SparsePoly.gens(4)[0]
    with pytest.raises(ResourceCapExceeded):
        buchberger([ModuleElement.from_components([z])])
    with pytest.raises(ResourceCapExceeded):
        buchberger([vec(x ** 5)])


def test_json_round_trip():
    e = vec(x * Fraction(1, 3) + 2, y * y - x)
    assert ModuleElement.from_json(e.to_json(), 2, 2) == e


def one_var_rows(boundary_point: bool):
    S = Subspace.full(1)
    B = Subspace([], ambient_dim=1) if boundary_point else S
    return [BoundaryRow(((0, 1), (1, -1)), B)]


def test_kernel_full_overlap_is_diagonal():
    one = SparsePoly.constant(1, 1)
    K = kernel_generators(one_var_rows(False), 2, 1)
    assert K == [ModuleElement.from_components([one, one])]


def test_kernel_injective_row_is_zero():
    rows = [BoundaryRow(((0, 1),), Subspace.full(1))]
    assert kernel_generators(rows, 1, 1) == []


def test_kernel_point_boundary_generators():
    t = SparsePoly.gens(1)[0]
    one, zero = SparsePoly.constant(1, 1), SparsePoly.zero(1)
    rows = one_var_rows(True)
    K = kernel_generators(rows, 2, 1)
    expected = [ModuleElement.from_components(c) for c in ([one, one], [t, zero], [zero, t])]
    E = buchberger(expected, TOP)
    assert all(reduce(k, E, TOP).is_zero() for k in K)
    assert all(reduce(e, K, TOP).is_zero() for e in expected)
    assert all(kernel_check(k, rows) for k in K)


INSTANCES = {
    "line": [Subspace.axis(0, 2)],
    "axes": [Subspace.axis(0, 2), Subspace.axis(1, 2)],
    "x+diag": [Subspace.axis(0, 2), Subspace([[1, 1]])],
    "full+line": [Subspace.full(2), Subspace.axis(0, 2)],
    "origin-in-line": [Subspace([], ambient_dim=1)],
    "three-lines": [Subspace.axis(0, 2), Subspace.axis(1, 2), Subspace([[1, 1]])],
}


@pytest.mark.parametrize("name", sorted(INSTANCES))
@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_degree_slice_matches_nullspace(name, r):
    P = build_partition(INSTANCES[name])
    T = build_incidence(P)
    n = P.subspaces[0].ambient_dim
    rows = t_action(P, T)
    K = kernel_generators(rows, P.size, n)
    assert all(kernel_check(k, rows) for k in K)
    assert is_groebner(K, TOP)
    sl = degree_slice(K, r, P.size, n)
    basis, _ = _kernel(continuity_system(P, T, r))
    assert same_span(sl, basis, len(basis[0]) if basis else 0)


@st.composite
def elements(draw, rank=2):
    comps = []
    for _ in range(rank):
        terms = draw(st.lists(st.tuples(st.tuples(st.integers(0, 2), st.integers(0, 2)),
                                        st.integers(-3, 3)), max_size=3))
        comps.append(SparsePoly(terms, 2, True))
    return ModuleElement.from_components(comps)


GENS = [vec(x * y - 1, y), vec(y * y, x - 1), vec(x, ONE2)]
BASIS = buchberger(GENS)


@settings(max_examples=200, deadline=None)
@given(elements())
def test_reduce_idempotent(e):
    r = reduce(e, BASIS)
    assert reduce(r, BASIS) == r


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.tuples(st.integers(0, 2), st.integers(0, 2)), st.integers(-3, 3)),
                min_size=3, max_size=3))
def test_membership_soundness(mult):
    e = vec(ZERO2, ZERO2)
    for g, (m, c) in zip(GENS, mult):
        e = e + g.scale(Fraction(c), m)
    assert reduce(e, BASIS).is_zero()


def test_basis_is_deterministic():
    assert buchberger(GENS) == buchberger(list(reversed(GENS)))
