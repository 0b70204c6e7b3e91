"""Gröbner bases of submodules of free modules ``Q[x_1..x_n]^λ``.

Elements are sparse maps ``(position, exponents) -> Fraction``.  The
kernel of the boundary operator of a subspace arrangement is obtained as a
syzygy module: the generators of the image, tagged with unit vectors, are
completed under a position-over-term order that ranks the image positions
first, and the basis elements with vanishing image part are the syzygies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

from . import _exact
from .polynomial import MONOMIAL_ORDERS, SparsePoly, monomials_upto, restrict_to_span

DESK_CAPS = {"positions": 6, "nvars": 3, "degree": 4}


class ResourceCapExceeded(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial or []


@dataclass(frozen=True)
class ModuleOrder:
    base: str = "grevlex"
    position: str = "pot"  # position-over-term or "top"

    def key(self, term):
        pos, m = term
        mk = MONOMIAL_ORDERS[self.base](m)
        if self.position == "pot":
            return (-pos, mk)
        return (mk, -pos)


POT = ModuleOrder("grevlex", "pot")
TOP = ModuleOrder("grevlex", "top")


class ModuleElement:
    """Vector of exact polynomials, stored sparsely."""

    __slots__ = ("terms", "rank", "nvars")

    def __init__(self, terms: dict, rank: int, nvars: int):
        self.terms = {k: v for k, v in terms.items() if v != 0}
        self.rank = rank
        self.nvars = nvars

    @classmethod
    def from_components(cls, comps: Sequence[SparsePoly]) -> ModuleElement:
        if not comps:
            raise ValueError("need at least one component")
        n = comps[0].nvars
        terms = {}
        for i, p in enumerate(comps):
            if p.nvars != n:
                raise ValueError("components have different numbers of variables")
            if not p.exact:
                raise TypeError("module elements are exact only")
            for m, c in p.terms.items():
                terms[(i, m)] = c
        return cls(terms, len(comps), n)

    @classmethod
    def unit(cls, i: int, rank: int, nvars: int) -> ModuleElement:
        return cls({(i, (0,) * nvars): Fraction(1)}, rank, nvars)

    def components(self) -> list[SparsePoly]:
        buckets = [dict() for _ in range(self.rank)]
        for (i, m), c in self.terms.items():
            buckets[i][m] = c
        return [SparsePoly(b, self.nvars, True) for b in buckets]

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(m) for _, m in self.terms), default=-1)

    def __add__(self, other):
        t = dict(self.terms)
        for k, v in other.terms.items():
            s = t.get(k, 0) + v
            if s == 0:
                t.pop(k, None)
            else:
                t[k] = s
        return ModuleElement(t, self.rank, self.nvars)

    def __neg__(self):
        return ModuleElement({k: -v for k, v in self.terms.items()}, self.rank, self.nvars)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c, mono=None) -> ModuleElement:
        c = Fraction(c)
        if mono is None:
            return ModuleElement({k: v * c for k, v in self.terms.items()}, self.rank, self.nvars)
        return ModuleElement(
            {(i, tuple(a + b for a, b in zip(m, mono))): v * c for (i, m), v in self.terms.items()},
            self.rank, self.nvars)

    def mul_poly(self, p: SparsePoly) -> ModuleElement:
        out = ModuleElement({}, self.rank, self.nvars)
        for m, c in p.terms.items():
            out = out + self.scale(c, m)
        return out

    def __eq__(self, other):
        return isinstance(other, ModuleElement) and self.terms == other.terms and self.rank == other.rank

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return "(" + ", ".join(str(c) for c in self.components()) + ")"

    def to_json(self) -> list[dict]:
        out = []
        for (i, m), c in sorted(self.terms.items(), key=lambda t: TOP.key(t[0]), reverse=True):
            out.append({"position": i, "exponents": list(m), "coeff": f"{c.numerator}/{c.denominator}"})
        return out

    @classmethod
    def from_json(cls, data, rank: int, nvars: int) -> ModuleElement:
        terms = {}
        for t in data:
            key = (int(t["position"]), tuple(int(e) for e in t["exponents"]))
            if not 0 <= key[0] < rank or len(key[1]) != nvars:
                raise ValueError(f"term {t!r} does not fit rank {rank} / {nvars} variables")
            terms[key] = terms.get(key, 0) + _exact.to_fraction(t["coeff"])
        return cls(terms, rank, nvars)


def leading_term(e: ModuleElement, order: ModuleOrder = POT):
    """``(position, monomial, coefficient)`` of the largest term."""
    if e.is_zero():
        raise ValueError("zero element has no leading term")
    k = max(e.terms, key=order.key)
    return k[0], k[1], e.terms[k]


def _divides(a, b):
    return all(x <= y for x, y in zip(a, b))


def _monic(e: ModuleElement, order) -> ModuleElement:
    _, _, c = leading_term(e, order)
    return e if c == 1 else e.scale(1 / c)


def reduce(e: ModuleElement, G: Sequence[ModuleElement], order: ModuleOrder = POT) -> ModuleElement:
    """Full normal form of ``e`` modulo ``G``: no remaining term is divisible
    by a leading term of ``G`` in the same position."""
    lts = [leading_term(g, order) for g in G if not g.is_zero()]
    gs = [g for g in G if not g.is_zero()]
    p = dict(e.terms)
    rem = {}
    while p:
        k = max(p, key=order.key)
        pos, m = k
        c = p[k]
        for g, (gp, gm, gc) in zip(gs, lts):
            if gp == pos and _divides(gm, m):
                shift = tuple(a - b for a, b in zip(m, gm))
                f = c / gc
                for (i, mm), v in g.terms.items():
                    kk = (i, tuple(a + b for a, b in zip(mm, shift)))
                    s = p.get(kk, 0) - f * v
                    if s == 0:
                        p.pop(kk, None)
                    else:
                        p[kk] = s
                break
        else:
            rem[k] = c
            del p[k]
    return ModuleElement(rem, e.rank, e.nvars)


def s_vector(f: ModuleElement, g: ModuleElement, order: ModuleOrder = POT) -> ModuleElement | None:
    pf, mf, cf = leading_term(f, order)
    pg, mg, cg = leading_term(g, order)
    if pf != pg:
        return None
    lcm = tuple(max(a, b) for a, b in zip(mf, mg))
    uf = tuple(a - b for a, b in zip(lcm, mf))
    ug = tuple(a - b for a, b in zip(lcm, mg))
    return f.scale(1 / cf, uf) - g.scale(1 / cg, ug)


def _check_caps(gens, caps):
    if not gens:
        return
    e = gens[0]
    if e.rank > caps["positions"] or e.nvars > caps["nvars"] or max(g.degree() for g in gens) > caps["degree"]:
        raise ResourceCapExceeded(
            f"input exceeds desk-scale caps {caps} (rank {e.rank}, nvars {e.nvars})")


def buchberger(
    generators: Iterable[ModuleElement],
    order: ModuleOrder = POT,
    caps: dict | None = DESK_CAPS,
    max_basis: int = 400,
    max_pairs: int = 100_000,
) -> list[ModuleElement]:
    """Reduced Gröbner basis by Buchberger's algorithm.

    Pairs are processed lowest lcm degree first; pairs whose leading terms
    sit in different positions have no S-vector and are skipped.
    """
    gens = [g for g in generators if not g.is_zero()]
    if caps is not None:
        _check_caps(gens, caps)
    G = [_monic(g, order) for g in gens]
    lts = [leading_term(g, order) for g in G]

    def pair_key(i, j):
        lcm = tuple(max(a, b) for a, b in zip(lts[i][1], lts[j][1]))
        return (sum(lcm), order.key((lts[i][0], lcm)), i, j)

    pairs = [pair_key(i, j) for i in range(len(G)) for j in range(i) if lts[i][0] == lts[j][0]]
    processed = 0
    while pairs:
        pairs.sort(reverse=True)
        *_, i, j = pairs.pop()
        processed += 1
        if processed > max_pairs:
            raise ResourceCapExceeded("pair budget exhausted", G)
        s = s_vector(G[i], G[j], order)
        if s is None:
            continue
        h = reduce(s, G, order)
        if h.is_zero():
            continue
        G.append(_monic(h, order))
        lts.append(leading_term(G[-1], order))
        if len(G) > max_basis:
            raise ResourceCapExceeded("basis size cap exceeded", G)
        k = len(G) - 1
        pairs.extend(pair_key(k, t) for t in range(k) if lts[t][0] == lts[k][0])
    return interreduce(G, order)


def interreduce(G: Sequence[ModuleElement], order: ModuleOrder = POT) -> list[ModuleElement]:
    G = [_monic(g, order) for g in G if not g.is_zero()]
    lts = [leading_term(g, order) for g in G]
    keep = []
    for i, (pi, mi, _) in enumerate(lts):
        dominated = False
        for j, (pj, mj, _) in enumerate(lts):
            if i != j and pi == pj and _divides(mj, mi) and (mj != mi or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(G[i])
    out = []
    for i, g in enumerate(keep):
        others = keep[:i] + keep[i + 1:]
        lt = leading_term(g, order)
        tail = ModuleElement({k: v for k, v in g.terms.items() if k != (lt[0], lt[1])}, g.rank, g.nvars)
        red = reduce(tail, others, order)
        out.append(_monic(red + ModuleElement({(lt[0], lt[1]): lt[2]}, g.rank, g.nvars), order))
    out.sort(key=lambda g: order.key(leading_term(g, order)[:2]))
    return out


def is_groebner(G: Sequence[ModuleElement], order: ModuleOrder = POT) -> bool:
    """Every S-vector of ``G`` reduces to zero."""
    for i in range(len(G)):
        for j in range(i):
            s = s_vector(G[i], G[j], order)
            if s is not None and not reduce(s, G, order).is_zero():
                return False
    return True


# ------------------------------------------------------- boundary operator


@dataclass(frozen=True)
class BoundaryRow:
    """``f ↦ Σ_l sign_l f_l`` taken modulo the vanishing ideal of ``carrier``."""

    signs: tuple  # ((position, sign), ...)
    carrier: object  # Subspace

    def ideal_generators(self) -> list[SparsePoly]:
        comp = self.carrier.complement()
        return [SparsePoly.linear_form(list(g), 0, True) for g in comp.gens]

    def apply(self, f: ModuleElement) -> SparsePoly:
        """The restriction of the signed sum to the carrier (zero iff in kernel)."""
        comps = f.components()
        g = SparsePoly.zero(f.nvars)
        for pos, s in self.signs:
            g = g + comps[pos] * s
        if self.carrier.dim == 0:
            return SparsePoly.constant(g.eval([0] * f.nvars), 0)
        return restrict_to_span(g, self.carrier.gens)


def t_action(partition, incidence) -> list[BoundaryRow]:
    return [BoundaryRow(((r.hi, 1), (r.lo, -1)), r.boundary) for r in incidence.rows]


def kernel_generators(
    rows: Sequence[BoundaryRow],
    n_classes: int,
    nvars: int,
    order: ModuleOrder = TOP,
    max_basis: int = 2000,
) -> list[ModuleElement]:
    """Generators of ``{f in P^λ : T f = 0}`` as a Gröbner basis under ``order``.

    With ``order`` degree compatible (the default), the degree <= r part of
    the kernel is spanned by the monomial multiples of the returned basis of
    degree <= r.
    """
    tau = len(rows)
    if tau == 0:
        return [ModuleElement.unit(i, n_classes, nvars) for i in range(n_classes)]
    images = []  # (image vector as dict over row positions, tag)
    for l in range(n_classes):
        img = {}
        for r, row in enumerate(rows):
            for pos, s in row.signs:
                if pos == l:
                    img[(r, (0,) * nvars)] = img.get((r, (0,) * nvars), 0) + Fraction(s)
        images.append(img)
    for r, row in enumerate(rows):
        for ell in row.ideal_generators():
            images.append({(r, m): c for m, c in ell.terms.items()})
    N = len(images)
    width = tau + N
    graph = []
    for t, img in enumerate(images):
        terms = dict(img)
        terms[(tau + t, (0,) * nvars)] = Fraction(1)
        graph.append(ModuleElement(terms, width, nvars))
    G = buchberger(graph, POT, caps=None, max_basis=max_basis)
    syz = []
    for g in G:
        if all(pos >= tau for pos, _ in g.terms):
            proj = {(pos - tau, m): c for (pos, m), c in g.terms.items() if pos < tau + n_classes}
            e = ModuleElement(proj, n_classes, nvars)
            if not e.is_zero():
                syz.append(e)
    if not syz:
        return []
    return buchberger(syz, order, caps=None, max_basis=max_basis)


def kernel_check(f: ModuleElement, rows: Sequence[BoundaryRow]) -> bool:
    """Symbolic ``T f = 0``."""
    return all(row.apply(f).is_zero() for row in rows)


def monomial_multiples(G: Sequence[ModuleElement], degree: int) -> list[ModuleElement]:
    out = []
    for g in G:
        dg = g.degree()
        for m in monomials_upto(g.nvars, degree - dg) if dg <= degree else []:
            out.append(g.scale(1, m))
    return out


def degree_slice(G: Sequence[ModuleElement], degree: int, n_classes: int, nvars: int) -> list[list[Fraction]]:
    """Coefficient vectors (class-major, ``monomials_upto`` order) of the
    monomial multiples of ``G`` of degree <= ``degree``."""
    mons = monomials_upto(nvars, degree)
    idx = {m: i for i, m in enumerate(mons)}
    M = len(mons)
    out = []
    for e in monomial_multiples(G, degree):
        v = [Fraction(0)] * (n_classes * M)
        for (pos, m), c in e.terms.items():
            v[pos * M + idx[m]] = c
        out.append(v)
    return out


def same_span(A: Sequence[Sequence[Fraction]], B: Sequence[Sequence[Fraction]], ncols: int) -> bool:
    """Exact equality of row spans (equal ranks and mutual containment)."""
    ra, rb = _exact.rank([list(r) for r in A], ncols), _exact.rank([list(r) for r in B], ncols)
    if ra != rb:
        return False
    rab = _exact.rank([list(r) for r in A] + [list(r) for r in B], ncols)
    return rab == ra
