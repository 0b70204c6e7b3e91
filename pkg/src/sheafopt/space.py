"""Finite-dimensional real inner-product space: subspaces, projections,
affine sets and compact feasible regions.

Points are plain 1-d numpy arrays in the standard orthonormal basis of R^n.
A :class:`Subspace` keeps two descriptions of itself: exact rational spanning
vectors (used for intersections, ranks and symbolic restriction) and a float
orthonormal basis (used for projections and coordinates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import _exact
from ._exact import to_fraction

ORTHO_TOL = 1e-12
FEAS_TOL = 1e-9
MAX_AMBIENT_DIM = 16


class EmptyFeasibleSet(ValueError):
    pass


class UnboundedFeasibleSet(ValueError):
    pass


def as_vector(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise ValueError(f"expected a vector of length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    return v


class Subspace:
    """Linear subspace of R^n.

    Parameters
    ----------
    vectors : sequence of spanning vectors (must be linearly independent).
        The orthonormal basis is obtained from them by Gram-Schmidt in the
        given order, so carrier coordinates follow the caller's ordering.
    ambient_dim : required when ``vectors`` is empty.
    """

    def __init__(self, vectors: Sequence[Sequence] = (), ambient_dim: int | None = None):
        gens = [tuple(to_fraction(v) for v in vec) for vec in vectors]
        if ambient_dim is None:
            if not gens:
                raise ValueError("ambient_dim is required for the zero subspace")
            ambient_dim = len(gens[0])
        if not 1 <= ambient_dim <= MAX_AMBIENT_DIM:
            raise ValueError(f"ambient dimension must be in 1..{MAX_AMBIENT_DIM}")
        if any(len(g) != ambient_dim for g in gens):
            raise ValueError("spanning vectors disagree with the ambient dimension")
        if _exact.rank([list(g) for g in gens], ambient_dim) != len(gens):
            raise ValueError("spanning vectors are linearly dependent")
        self.ambient_dim = ambient_dim
        self.gens = tuple(gens)
        self.dim = len(gens)
        self.exact_orthonormal, self.basis = _orthonormalize(gens, ambient_dim)

    @classmethod
    def from_basis(cls, basis) -> Subspace:
        """From an ``(n, d)`` array whose columns span the subspace."""
        B = np.asarray(basis, dtype=float)
        return cls([B[:, j] for j in range(B.shape[1])], ambient_dim=B.shape[0])

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls([[int(i == j) for i in range(n)] for j in range(n)])

    @classmethod
    def zero(cls, n: int) -> Subspace:
        return cls([], ambient_dim=n)

    @classmethod
    def axis(cls, i: int, n: int) -> Subspace:
        return cls([[int(k == i) for k in range(n)]])

    @classmethod
    def coordinate(cls, idx: Sequence[int], n: int) -> Subspace:
        return cls([[int(k == i) for k in range(n)] for i in idx])

    def __repr__(self):
        return f"Subspace(dim={self.dim}, n={self.ambient_dim}, gens={[list(map(str, g)) for g in self.gens]})"

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def complement(self) -> Subspace:
        ns = _exact.nullspace([list(g) for g in self.gens], self.ambient_dim)
        return Subspace(ns, ambient_dim=self.ambient_dim)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = as_vector(x, self.ambient_dim)
        return bool(np.linalg.norm(x - self.projector @ x) <= tol)

    def contains_subspace(self, other: Subspace) -> bool:
        """Exact containment test ``other ⊆ self``."""
        if other.dim > self.dim:
            return False
        rows = [list(g) for g in self.gens] + [list(g) for g in other.gens]
        return _exact.rank(rows, self.ambient_dim) == self.dim

    def equals(self, other: Subspace) -> bool:
        return self.dim == other.dim and self.contains_subspace(other)

    def is_full(self) -> bool:
        return self.dim == self.ambient_dim

    def coords(self, x) -> np.ndarray:
        return self.basis.T @ as_vector(x, self.ambient_dim)

    def embed(self, t) -> np.ndarray:
        return self.basis @ np.asarray(t, dtype=float).reshape(-1)


def _orthonormalize(gens, n):
    """Gram-Schmidt; returns (exact orthonormal n×d Fraction rows or None, float n×d)."""
    ortho = []
    for g in gens:
        v = list(g)
        for u in ortho:
            uu = sum(a * a for a in u)
            c = sum(a * b for a, b in zip(v, u)) / uu
            v = [a - c * b for a, b in zip(v, u)]
        ortho.append(v)
    norms = [_exact.fraction_sqrt(sum(a * a for a in u)) for u in ortho]
    if ortho:
        B = np.array([[float(a) for a in u] for u in ortho]).T
        B = B / np.linalg.norm(B, axis=0)
    else:
        B = np.zeros((n, 0))
    if all(nm is not None for nm in norms):
        exact = [[ortho[j][i] / norms[j] for j in range(len(ortho))] for i in range(n)]
        B = np.array([[float(v) for v in row] for row in exact]).reshape(n, len(ortho))
    else:
        exact = None
    return exact, B


def principal_angles(S1: Subspace, S2: Subspace) -> np.ndarray:
    if S1.dim == 0 or S2.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(S1.basis.T @ S2.basis, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def same_subspace(S1: Subspace, S2: Subspace, tol: float = 1e-9) -> bool:
    if S1.dim != S2.dim:
        return False
    if S1.dim == 0:
        return True
    # sine of the largest principal angle; arccos would amplify rounding
    return bool(np.linalg.norm(S1.projector - S2.projector, 2) < tol)


def project(x, S: Subspace) -> np.ndarray:
    """Orthogonal projection ``B Bᵀ x`` onto ``S``."""
    x = as_vector(x)
    if x.shape[0] != S.ambient_dim:
        raise ValueError(f"point in R^{x.shape[0]} but subspace in R^{S.ambient_dim}")
    return S.basis @ (S.basis.T @ x)


def intersect_subspaces(subspaces: Sequence[Subspace]) -> Subspace:
    """Exact intersection, computed as the nullspace of the stacked
    orthogonal-complement constraints."""
    if not subspaces:
        raise ValueError("need at least one subspace")
    n = subspaces[0].ambient_dim
    if any(S.ambient_dim != n for S in subspaces):
        raise ValueError("ambient dimensions differ")
    rows = []
    for S in subspaces:
        rows.extend(_exact.nullspace([list(g) for g in S.gens], n))
    if not rows:
        return Subspace.full(n) if all(S.is_full() for S in subspaces) else subspaces[0]
    return Subspace(_exact.nullspace(rows, n), ambient_dim=n)


def sum_subspaces(subspaces: Sequence[Subspace]) -> Subspace:
    n = subspaces[0].ambient_dim
    rows = [list(g) for S in subspaces for g in S.gens]
    if not rows:
        return Subspace.zero(n)
    R, _ = _exact.rref(rows, n)
    return Subspace(R, ambient_dim=n)


# ---------------------------------------------------------------- affine sets


@dataclass(frozen=True)
class AffineSet:
    point: np.ndarray
    directions: Subspace

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        d = as_vector(x) - self.point
        return bool(np.linalg.norm(d - project(d, self.directions)) <= tol)

    @property
    def dim(self) -> int:
        return self.directions.dim


@dataclass(frozen=True)
class AffineIntersection:
    """Result of :func:`intersect_affine`.

    ``status`` is ``"point"``, ``"affine"`` or ``"empty"``.  For an empty
    intersection ``affine`` holds the minimal-residual (least-squares) set
    and ``residual`` its constraint violation.
    """

    status: str
    affine: AffineSet
    residual: float
    rank: int

    @property
    def is_point(self) -> bool:
        return self.status == "point"

    @property
    def empty(self) -> bool:
        return self.status == "empty"


def affine_constraints(A: AffineSet):
    """Rows ``C`` and rhs ``c`` with ``A = {x : C x = c}``."""
    comp = A.directions.complement()
    C = comp.basis.T
    return C, C @ A.point


def intersect_affine(sets: Sequence[AffineSet], tol: float = FEAS_TOL) -> AffineIntersection:
    if not sets:
        raise ValueError("need at least one affine set")
    n = sets[0].directions.ambient_dim
    blocks = [affine_constraints(A) for A in sets]
    C = np.vstack([b[0] for b in blocks]) if blocks else np.zeros((0, n))
    c = np.concatenate([b[1] for b in blocks]) if blocks else np.zeros(0)
    if C.shape[0] == 0:
        return AffineIntersection("affine" if n else "point", AffineSet(np.zeros(n), Subspace.full(n)), 0.0, 0)
    x, *_ = np.linalg.lstsq(C, c, rcond=None)
    residual = float(np.linalg.norm(C @ x - c))
    _, s, vh = np.linalg.svd(C)
    rk = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 1.0)))
    null = vh[rk:].T
    directions = Subspace.from_basis(null) if null.shape[1] else Subspace.zero(n)
    if residual > tol:
        status = "empty"
    elif directions.dim == 0:
        status = "point"
    else:
        status = "affine"
    return AffineIntersection(status, AffineSet(x, directions), residual, rk)


# ------------------------------------------------------------ feasible shapes


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float).reshape(-1), np.asarray(self.upper, float).reshape(-1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ValueError("box bounds have different lengths")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnboundedFeasibleSet("box bounds must be finite")
        if np.any(lo > hi):
            raise EmptyFeasibleSet("box has lower > upper")

    kind = "box"

    @property
    def dim(self):
        return self.lower.shape[0]

    def halfspaces(self):
        d = self.dim
        A = np.vstack([np.eye(d), -np.eye(d)]) if d else np.zeros((0, 0))
        b = np.concatenate([self.upper, -self.lower])
        return A, b

    def contains(self, t, tol=FEAS_TOL):
        return bool(np.all(t >= self.lower - tol) and np.all(t <= self.upper + tol))

    def nearest(self, t):
        return np.clip(t, self.lower, self.upper)

    def bounds(self):
        return self.lower.copy(), self.upper.copy()

    def vertices(self):
        if self.dim == 0:
            return np.zeros((1, 0))
        return np.array(list(product(*zip(self.lower, self.upper))), dtype=float)


@dataclass(frozen=True)
class Polytope:
    A: np.ndarray
    b: np.ndarray

    kind = "polytope"

    def __post_init__(self):
        A = np.asarray(self.A, float)
        b = np.asarray(self.b, float).reshape(-1)
        if A.ndim == 1:
            A = A.reshape(len(b), -1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if A.shape[0] != b.shape[0]:
            raise ValueError("polytope A and b disagree")
        d = A.shape[1]
        if d == 0:
            if np.any(b < -FEAS_TOL):
                raise EmptyFeasibleSet("polytope is empty")
            return
        res = linprog(np.zeros(d), A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
        if res.status == 2:
            raise EmptyFeasibleSet("polytope is empty")
        lo, hi = np.empty(d), np.empty(d)
        for i in range(d):
            c = np.zeros(d)
            c[i] = 1.0
            r1 = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
            r2 = linprog(-c, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
            if r1.status == 3 or r2.status == 3:
                raise UnboundedFeasibleSet(f"polytope unbounded along coordinate {i}")
            lo[i], hi[i] = r1.x[i], r2.x[i]
        object.__setattr__(self, "_bounds", (lo, hi))

    @property
    def dim(self):
        return self.A.shape[1]

    def halfspaces(self):
        return self.A, self.b

    def contains(self, t, tol=FEAS_TOL):
        return bool(np.all(self.A @ t <= self.b + tol))

    def bounds(self):
        if self.dim == 0:
            return np.zeros(0), np.zeros(0)
        lo, hi = self._bounds
        return lo.copy(), hi.copy()

    def vertices(self):
        return polytope_vertices(self.A, self.b)

    def nearest(self, t):
        return project_polytope(t, self.A, self.b)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    kind = "ball"

    def __post_init__(self):
        c = np.asarray(self.center, float).reshape(-1)
        object.__setattr__(self, "center", c)
        if not np.isfinite(self.radius):
            raise UnboundedFeasibleSet("ball radius must be finite")
        if self.radius < 0:
            raise EmptyFeasibleSet("negative radius")

    @property
    def dim(self):
        return self.center.shape[0]

    def halfspaces(self):
        return None

    def contains(self, t, tol=FEAS_TOL):
        return bool(np.linalg.norm(t - self.center) <= self.radius + tol)

    def nearest(self, t):
        d = t - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return t.copy()
        return self.center + d * (self.radius / r)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


def polytope_vertices(A, b, tol=FEAS_TOL) -> np.ndarray:
    d = A.shape[1]
    if d == 0:
        return np.zeros((1, 0))
    verts = []
    for rows in combinations(range(A.shape[0]), d):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ v <= b + tol) and not any(np.linalg.norm(v - w) < 1e-9 for w in verts):
            verts.append(v)
    verts.sort(key=tuple)
    return np.array(verts).reshape(-1, d)


def project_polytope(y, A, b, tol=FEAS_TOL) -> np.ndarray:
    """Euclidean projection onto ``{t : A t <= b}`` by active-set enumeration.

    Every face is tried: for an active set ``S`` the projection onto the
    affine hull ``A_S t = b_S`` is computed in closed form and kept when it
    is feasible.  The closest feasible candidate is the projection.
    """
    y = np.asarray(y, float)
    d = A.shape[1]
    if d == 0 or np.all(A @ y <= b + tol):
        return y.copy()
    best, best_d = None, np.inf
    for k in range(1, d + 1):
        for rows in combinations(range(A.shape[0]), k):
            M = A[list(rows)]
            G = M @ M.T
            if np.linalg.matrix_rank(G) < k:
                continue
            lam = np.linalg.solve(G, M @ y - b[list(rows)])
            if np.any(lam < -1e-12):
                continue
            t = y - M.T @ lam
            if np.all(A @ t <= b + tol):
                dist = np.linalg.norm(t - y)
                if dist < best_d - 1e-15:
                    best, best_d = t, dist
    if best is None:
        raise EmptyFeasibleSet("no feasible face found")
    return best


_SHAPES = {"box": Box, "polytope": Polytope, "ball": Ball}


@dataclass(frozen=True)
class FeasibleSet:
    """Compact convex region ``{B t : t in shape}`` inside ``carrier``.

    The shape is expressed in the coordinates of the carrier's orthonormal
    basis.
    """

    carrier: Subspace
    shape: Box | Polytope | Ball

    def __post_init__(self):
        if self.shape.dim != self.carrier.dim:
            raise ValueError(
                f"shape has dimension {self.shape.dim}, carrier has dimension {self.carrier.dim}"
            )

    @classmethod
    def box(cls, carrier: Subspace, lower, upper) -> FeasibleSet:
        return cls(carrier, Box(lower, upper))

    @classmethod
    def polytope(cls, carrier: Subspace, A, b) -> FeasibleSet:
        return cls(carrier, Polytope(A, b))

    @classmethod
    def ball(cls, carrier: Subspace, center, radius) -> FeasibleSet:
        return cls(carrier, Ball(center, radius))

    @property
    def kind(self) -> str:
        return self.shape.kind

    @property
    def ambient_dim(self) -> int:
        return self.carrier.ambient_dim

    @property
    def dim(self) -> int:
        return self.carrier.dim

    def local(self, x) -> np.ndarray:
        return self.carrier.coords(x)

    def ambient(self, t) -> np.ndarray:
        return self.carrier.embed(t)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = as_vector(x, self.ambient_dim)
        return self.carrier.contains(x, tol) and self.shape.contains(self.local(x), tol)

    def nearest(self, x) -> np.ndarray:
        """The feasible point closest to the projection of ``x`` on the carrier."""
        return self.ambient(self.shape.nearest(self.local(x)))

    def halfspaces_ambient(self):
        """``(G, h)`` with ``self = carrier ∩ {G x <= h}`` or None for balls."""
        hs = self.shape.halfspaces()
        if hs is None:
            return None
        A, b = hs
        return (A @ self.carrier.basis.T if A.size else np.zeros((A.shape[0], self.ambient_dim))), b

    def vertices(self) -> np.ndarray | None:
        if self.kind == "ball":
            return None
        V = self.shape.vertices()
        return np.array([self.ambient(v) for v in V]).reshape(-1, self.ambient_dim)

    def bounding_box(self):
        """Ambient axis-aligned bounding box ``(lo, hi)``."""
        if self.kind == "ball":
            c = self.ambient(self.shape.center)
            ext = self.shape.radius * np.linalg.norm(self.carrier.basis, axis=1)
            return c - ext, c + ext
        V = self.vertices()
        return V.min(axis=0), V.max(axis=0)

    def section(self, S: Subspace) -> FeasibleSet:
        """``self ∩ S`` as a feasible set carried by ``S ∩ carrier``."""
        carrier = intersect_subspaces([self.carrier, S])
        C = carrier.basis
        if self.kind == "ball":
            c = self.ambient(self.shape.center)
            pc = project(c, carrier)
            r2 = self.shape.radius**2 - float(np.sum((c - pc) ** 2))
            if r2 < -FEAS_TOL:
                raise EmptyFeasibleSet("section misses the ball")
            return FeasibleSet(carrier, Ball(carrier.coords(pc), np.sqrt(max(r2, 0.0))))
        G, h = self.halfspaces_ambient()
        return FeasibleSet(carrier, _clean_polytope(G @ C, h, carrier.dim))

    def intersect(self, other: FeasibleSet) -> FeasibleSet:
        carrier = intersect_subspaces([self.carrier, other.carrier])
        if self.kind == "ball" or other.kind == "ball":
            for a, b in ((self, other), (other, self)):
                if a.kind == "ball" and b.carrier.contains_subspace(carrier):
                    sec = a.section(carrier)
                    if b.kind == "ball":
                        if sec.contains_set_of(b.section(carrier)):
                            return b.section(carrier)
                    if b.section(carrier).contains_set_of(sec):
                        return sec
            raise NotImplementedError("intersection of a ball with a non-nested set is not polyhedral")
        G1, h1 = self.halfspaces_ambient()
        G2, h2 = other.halfspaces_ambient()
        C = carrier.basis
        return FeasibleSet(carrier, _clean_polytope(np.vstack([G1, G2]) @ C, np.concatenate([h1, h2]), carrier.dim))

    def contains_set_of(self, other: FeasibleSet, tol: float = FEAS_TOL) -> bool:
        """Exact-for-convex containment ``other ⊆ self``."""
        if other.kind != "ball":
            return all(self.contains(v, tol) for v in other.vertices())
        c = other.ambient(other.shape.center)
        rho = other.shape.radius
        if rho > tol and not self.carrier.contains_subspace(other.carrier):
            return False
        if not self.carrier.contains(c, tol):
            return False
        if self.kind == "ball":
            c2 = self.ambient(self.shape.center)
            diff = c - c2
            along = np.linalg.norm(project(diff, other.carrier))
            perp2 = float(np.sum(diff**2)) - along**2
            return bool(np.sqrt(max(perp2, 0.0) + (along + rho) ** 2) <= self.shape.radius + tol)
        G, h = self.halfspaces_ambient()
        P = other.carrier.projector
        support = G @ c + rho * np.linalg.norm(G @ P, axis=1)
        return bool(np.all(support <= h + tol))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """``k`` uniform points by rejection from the local bounding box."""
        lo, hi = self.shape.bounds()
        out = []
        while len(out) < k:
            T = rng.uniform(lo, hi, size=(max(k, 16), self.dim))
            for t in T:
                if self.shape.contains(t):
                    out.append(self.ambient(t))
                    if len(out) == k:
                        break
        return np.array(out).reshape(k, self.ambient_dim)


def _clean_polytope(A, b, d) -> Polytope:
    keep_A, keep_b = [], []
    for row, rhs in zip(A, b):
        if np.linalg.norm(row) <= 1e-12:
            if rhs < -FEAS_TOL:
                raise EmptyFeasibleSet("sections do not meet")
            continue
        keep_A.append(row)
        keep_b.append(rhs)
    return Polytope(np.array(keep_A).reshape(len(keep_A), d), np.array(keep_b))


def gamma(x, F: FeasibleSet) -> list[np.ndarray]:
    """All points of ``F`` closest to the projection of ``x`` on ``F.carrier``.

    ``F`` is convex, so the set is a single point; it is returned as a list
    for uniformity with the set-valued definition.
    """
    x = as_vector(x, F.ambient_dim)
    return [F.nearest(x)]


def points_close(a, b, tol: float = FEAS_TOL) -> bool:
    return bool(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)) <= tol)
