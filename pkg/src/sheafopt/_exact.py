"""Exact rational linear algebra on lists of Fractions.

Small dense routines used wherever a rank or a nullspace must be decided
without floating point error (subspace intersections, continuity systems).
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np


def to_fraction(v) -> Fraction:
    """Convert a scalar to a Fraction.

    Floats are read through their shortest decimal representation, so
    ``0.1`` becomes ``1/10`` rather than the binary expansion.
    Strings of the form ``"p/q"`` are accepted.
    """
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (bool, np.bool_)):
        return Fraction(int(v))
    if isinstance(v, (int, np.integer, Rational)):
        return Fraction(int(v)) if isinstance(v, (int, np.integer)) else Fraction(v)
    if isinstance(v, (float, np.floating)):
        if not np.isfinite(v):
            raise ValueError(f"non-finite value {v!r}")
        return Fraction(repr(float(v)))
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot convert {type(v).__name__} to Fraction")


def fraction_matrix(rows) -> list[list[Fraction]]:
    return [[to_fraction(v) for v in row] for row in rows]


def rref(rows: list[list[Fraction]], ncols: int | None = None):
    """Reduced row echelon form.

    Returns ``(R, pivots)`` where ``R`` holds only the nonzero rows.
    """
    m = [list(r) for r in rows]
    if ncols is None:
        ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        if p != 1:
            m[r] = [v / p for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                row_r = m[r]
                m[i] = [a - f * b for a, b in zip(m[i], row_r)]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows, ncols: int | None = None) -> int:
    if not rows:
        return 0
    return len(rref(rows, ncols)[1])


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{v : A v = 0}``, one vector per free column.

    Each vector has a 1 in its free column and zeros in the other free
    columns, so the basis is the canonical reduced echelon basis.
    """
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    R, pivots = rref(rows, ncols)
    pivset = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivset:
            continue
        v = [Fraction(0)] * ncols
        v[free] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[free]
        basis.append(v)
    return basis


def solve(rows: list[list[Fraction]], rhs: list[Fraction], ncols: int):
    """One exact solution of ``A x = b`` (free variables set to 0), or None."""
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    if not aug:
        return [Fraction(0)] * ncols
    R, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for row, pc in zip(R, pivots):
        x[pc] = row[ncols]
    return x


def det(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    m = [list(r) for r in rows]
    n = len(m)
    d = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            d = -d
        d *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] / m[c][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return d


def fraction_sqrt(q: Fraction) -> Fraction | None:
    """Exact square root of a non-negative rational, or None if irrational."""
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn, rd = _isqrt_exact(num), _isqrt_exact(den)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def _isqrt_exact(k: int) -> int | None:
    from math import isqrt

    r = isqrt(k)
    return r if r * r == k else None
