"""Sparse multivariate polynomials over Q (exact) or over floats.

A polynomial is a mapping from exponent tuples to coefficients.  The two
backends never mix implicitly: combining an exact and a float polynomial
raises, and conversion goes through :meth:`SparsePoly.to_float` /
:meth:`SparsePoly.to_exact`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterable, Mapping

import numpy as np

from ._exact import to_fraction

MAX_DEGREE = 8

Monomial = tuple  # tuple[int, ...] of exponents


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def grevlex_key(m: Monomial):
    return (sum(m), tuple(-e for e in reversed(m)))


def lex_key(m: Monomial):
    return tuple(m)


def grlex_key(m: Monomial):
    return (sum(m), tuple(m))


MONOMIAL_ORDERS = {"grevlex": grevlex_key, "lex": lex_key, "grlex": grlex_key}


def monomials_upto(nvars: int, degree: int) -> list[Monomial]:
    """All monomials in ``nvars`` variables of total degree <= degree.

    Ordered by increasing degree, then decreasing grevlex within a degree
    (so ``1, x, y, x^2, xy, y^2`` for two variables).
    """
    out = []
    for d in range(degree + 1):
        layer = []
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            layer.append(tuple(e))
        layer.sort(key=grevlex_key, reverse=True)
        out.extend(layer)
    if nvars == 0:
        return [()]
    return out


def n_monomials(nvars: int, degree: int) -> int:
    return math.comb(nvars + degree, degree)


class SparsePoly:
    """Multivariate polynomial ``{exponents: coefficient}``.

    ``exact=True`` stores Fractions; ``exact=False`` stores floats.
    Zero coefficients are never stored.
    """

    __slots__ = ("terms", "nvars", "exact")

    def __init__(self, terms: Mapping | Iterable = (), nvars: int | None = None, exact: bool = True):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = {}
        conv = to_fraction if exact else float
        for m, c in items:
            m = tuple(int(e) for e in m)
            if any(e < 0 for e in m):
                raise ValueError(f"negative exponent in {m}")
            if nvars is None:
                nvars = len(m)
            elif len(m) != nvars:
                raise ValueError(f"monomial {m} does not have {nvars} variables")
            c = conv(c)
            if not exact and not math.isfinite(c):
                raise ValueError("non-finite coefficient")
            if c != 0:
                clean[m] = clean.get(m, 0) + c
                if clean[m] == 0:
                    del clean[m]
        if nvars is None:
            raise ValueError("nvars is required for the zero polynomial")
        self.terms = clean
        self.nvars = nvars
        self.exact = exact

    # constructors

    @classmethod
    def zero(cls, nvars: int, exact: bool = True) -> SparsePoly:
        return cls({}, nvars, exact)

    @classmethod
    def constant(cls, c, nvars: int, exact: bool = True) -> SparsePoly:
        return cls({(0,) * nvars: c}, nvars, exact)

    @classmethod
    def variable(cls, i: int, nvars: int, exact: bool = True) -> SparsePoly:
        e = [0] * nvars
        e[i] = 1
        return cls({tuple(e): 1}, nvars, exact)

    @classmethod
    def gens(cls, nvars: int, exact: bool = True) -> list[SparsePoly]:
        return [cls.variable(i, nvars, exact) for i in range(nvars)]

    @classmethod
    def linear_form(cls, coeffs, constant=0, exact: bool = True) -> SparsePoly:
        n = len(coeffs)
        terms = {(0,) * n: constant}
        for i, a in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = a
        return cls(terms, n, exact)

    # basic queries

    def degree(self) -> float:
        if not self.terms:
            return -math.inf
        return max(sum(m) for m in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, m: Monomial):
        return self.terms.get(tuple(m), Fraction(0) if self.exact else 0.0)

    def sorted_terms(self, order: str = "grevlex"):
        key = MONOMIAL_ORDERS[order]
        return sorted(self.terms.items(), key=lambda t: key(t[0]), reverse=True)

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    # backend conversion

    def to_float(self) -> SparsePoly:
        return SparsePoly({m: float(c) for m, c in self.terms.items()}, self.nvars, exact=False)

    def to_exact(self) -> SparsePoly:
        return SparsePoly(self.terms, self.nvars, exact=True)

    def chop(self, tol: float = 1e-12) -> SparsePoly:
        """Drop float coefficients with magnitude <= tol."""
        if self.exact:
            return self
        return SparsePoly({m: c for m, c in self.terms.items() if abs(c) > tol}, self.nvars, False)

    # arithmetic

    def _coerce(self, other) -> SparsePoly:
        if isinstance(other, SparsePoly):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            if other.exact != self.exact:
                raise TypeError("cannot mix exact and float polynomials; convert explicitly")
            return other
        if self.exact and isinstance(other, float):
            raise TypeError("float scalar with exact polynomial; convert explicitly")
        return SparsePoly.constant(other, self.nvars, self.exact)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            v = terms.get(m, 0) + c
            if v == 0:
                terms.pop(m, None)
            else:
                terms[m] = v
        return SparsePoly(terms, self.nvars, self.exact)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly({m: -c for m, c in self.terms.items()}, self.nvars, self.exact)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, SparsePoly):
            c = to_fraction(other) if self.exact else float(other)
            if isinstance(other, float) and self.exact:
                raise TypeError("float scalar with exact polynomial; convert explicitly")
            return SparsePoly({m: v * c for m, v in self.terms.items()}, self.nvars, self.exact)
        other = self._coerce(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return SparsePoly(out, self.nvars, self.exact)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("power must be a non-negative integer")
        result = SparsePoly.constant(1, self.nvars, self.exact)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.nvars == other.nvars and self.exact == other.exact and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, self.exact, frozenset(self.terms.items())))

    def __repr__(self):
        return f"SparsePoly({self}, nvars={self.nvars}, exact={self.exact})"

    def __str__(self):
        if not self.terms:
            return "0"
        names = _var_names(self.nvars)
        parts = []
        for m, c in self.sorted_terms():
            mono = "*".join(
                n if e == 1 else f"{n}^{e}" for n, e in zip(names, m) if e
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # evaluation and calculus

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Value at a point; exact when both ``x`` and the backend are exact."""
        x = list(x)
        if len(x) != self.nvars:
            raise ValueError(f"point has {len(x)} coordinates, polynomial has {self.nvars} variables")
        if self.exact and all(isinstance(v, (int, Fraction)) for v in x):
            total = Fraction(0)
        else:
            x = [float(v) for v in x]
            total = 0.0
        for m, c in self.terms.items():
            t = c if not isinstance(total, float) else float(c)
            for v, e in zip(x, m):
                if e:
                    t = t * v**e
            total = total + t
        return total

    def eval_many(self, X) -> np.ndarray:
        """Float values at the rows of ``X`` (shape ``(k, nvars)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.nvars:
            raise ValueError("dimension mismatch")
        out = np.zeros(X.shape[0])
        for m, c in self.terms.items():
            t = np.full(X.shape[0], float(c))
            for i, e in enumerate(m):
                if e:
                    t *= X[:, i] ** e
            out += t
        return out

    def diff(self, i: int) -> SparsePoly:
        out = {}
        for m, c in self.terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                out[tuple(e)] = c * m[i]
        return SparsePoly(out, self.nvars, self.exact)

    def gradient(self) -> list[SparsePoly]:
        return [self.diff(i) for i in range(self.nvars)]

    def hessian(self) -> list[list[SparsePoly]]:
        g = self.gradient()
        return [[gi.diff(j) for j in range(self.nvars)] for gi in g]

    # substitution

    def compose_linear(self, B, offset=None) -> SparsePoly:
        """Substitute ``x = B t (+ offset)`` and expand.

        ``B`` has shape ``(nvars, d)``.  The result has ``d`` variables and is
        exact when this polynomial is exact and every entry of ``B`` (and the
        offset) is rational (int or Fraction); otherwise it is a float
        polynomial.
        """
        rows = [list(r) for r in B] if len(B) else [[] for _ in range(self.nvars)]
        if len(rows) != self.nvars:
            raise ValueError(f"substitution matrix needs {self.nvars} rows")
        d = len(rows[0]) if rows else 0
        exact = self.exact and all(
            isinstance(v, (int, Fraction)) and not isinstance(v, bool) for r in rows for v in r
        )
        if offset is not None:
            exact = exact and all(isinstance(v, (int, Fraction)) for v in offset)
        conv = to_fraction if exact else float
        forms = []
        for i, r in enumerate(rows):
            terms = {(0,) * d: conv(offset[i]) if offset is not None else conv(0)}
            for j, v in enumerate(r):
                e = [0] * d
                e[j] = 1
                terms[tuple(e)] = conv(v)
            forms.append(SparsePoly(terms, d, exact))
        src = self if exact else self.to_float()
        powers: dict = {}

        def power(i, e):
            key = (i, e)
            if key not in powers:
                powers[key] = forms[i] ** e
            return powers[key]

        result = SparsePoly.zero(d, exact)
        for m, c in src.terms.items():
            t = SparsePoly.constant(c, d, exact)
            for i, e in enumerate(m):
                if e:
                    t = t * power(i, e)
            result = result + t
        return result

    # serialization

    def to_json(self) -> list[dict]:
        out = []
        for m, c in self.sorted_terms():
            if self.exact:
                coeff = f"{c.numerator}/{c.denominator}"
            else:
                coeff = float(c)
            out.append({"exponents": list(m), "coeff": coeff})
        return out

    @classmethod
    def from_json(cls, data: list, nvars: int | None = None) -> SparsePoly:
        if not isinstance(data, list):
            raise ValueError("polynomial must be a list of terms")
        if not data and nvars is None:
            raise ValueError("nvars required for an empty term list")
        exact = all(not isinstance(t.get("coeff"), float) for t in data)
        terms = []
        for t in data:
            if not isinstance(t, dict) or "exponents" not in t or "coeff" not in t:
                raise ValueError(f"malformed term {t!r}")
            c = t["coeff"]
            terms.append((tuple(t["exponents"]), c))
        return cls(terms, nvars, exact)


def _var_names(n: int) -> list[str]:
    if n <= 3:
        return ["x", "y", "z"][:n]
    return [f"x{i}" for i in range(n)]


def poly_equal(p: SparsePoly, q: SparsePoly, tol: float = 1e-9) -> bool:
    """Coefficient-wise equality; exact for two exact polynomials."""
    if p.nvars != q.nvars:
        raise ValueError("nvars mismatch")
    if p.exact and q.exact:
        return p.terms == q.terms
    pf, qf = p.to_float(), q.to_float()
    keys = set(pf.terms) | set(qf.terms)
    return all(abs(pf.terms.get(m, 0.0) - qf.terms.get(m, 0.0)) <= tol for m in keys)


def gradient(p: SparsePoly) -> list[SparsePoly]:
    return p.gradient()


def from_coefficients(coeffs, monomials: list[Monomial], nvars: int, exact: bool) -> SparsePoly:
    return SparsePoly(zip(monomials, coeffs), nvars, exact)


def coefficient_vector(p: SparsePoly, monomials: list[Monomial]) -> list:
    index = {m: i for i, m in enumerate(monomials)}
    zero = Fraction(0) if p.exact else 0.0
    out = [zero] * len(monomials)
    for m, c in p.terms.items():
        if m not in index:
            raise ValueError(f"monomial {m} outside the supplied basis")
        out[index[m]] = c
    return out


def squared_distance_poly(center, exact: bool = True) -> SparsePoly:
    """|x - center|^2 as a polynomial in len(center) variables."""
    n = len(center)
    conv = to_fraction if exact else float
    xs = SparsePoly.gens(n, exact)
    total = SparsePoly.zero(n, exact)
    for xi, ci in zip(xs, center):
        diff = xi - SparsePoly.constant(conv(ci), n, exact)
        total = total + diff * diff
    return total


def restrict(p: SparsePoly, S) -> SparsePoly:
    """Restriction of ``p`` to the subspace ``S`` in its basis coordinates.

    Substitutes ``x = B t`` with ``B`` the orthonormal basis of ``S``.  The
    result is exact when ``p`` is exact and ``S`` has an exactly rational
    orthonormal basis; otherwise it is a float polynomial with coefficients
    below 1e-12 dropped.
    """
    if p.nvars != S.ambient_dim:
        raise ValueError(f"polynomial has {p.nvars} variables, subspace lives in R^{S.ambient_dim}")
    B = S.exact_orthonormal
    if B is None or not p.exact:
        return p.to_float().compose_linear(S.basis).chop(1e-12)
    return p.compose_linear(B)


def restrict_to_span(p: SparsePoly, gens) -> SparsePoly:
    """Substitute ``x = sum_j t_j g_j`` for spanning vectors ``g_j`` (any basis)."""
    n = p.nvars
    d = len(gens)
    B = [[gens[j][i] for j in range(d)] for i in range(n)]
    return p.compose_linear(B)
