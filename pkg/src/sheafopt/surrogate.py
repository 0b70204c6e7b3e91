"""Continuous piecewise-polynomial surrogates over a subspace arrangement.

A :class:`PiecewiseFn` carries one polynomial (in ambient variables) per
class of the partition.  It is continuous when, for every incidence row,
the difference of the two pieces vanishes on the shared boundary carrier.
At a fixed degree ``r`` these functions form a finite-dimensional space,
the kernel of a linear system with rational coefficients.

The data enter through canonical pieces: each pure class gets a quadratic
peaked at the local solution with the local optimal value, intersection
classes inherit the restriction of their parents, and the complement piece
is an equality-constrained least-squares fit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _exact
from .arrangement import IncidenceMatrix, Partition, build_incidence, build_partition
from .category import Incompatible, IncompatibleFamily, LocalProblem, restrictions_agree
from .local_solver import DISTINCT_TOL, VALUE_TOL, maximize_on_shape, solve_local
from .polynomial import (
    MAX_DEGREE,
    SparsePoly,
    monomials_upto,
    restrict,
    restrict_to_span,
    squared_distance_poly,
)
from .space import FEAS_TOL, EmptyFeasibleSet, FeasibleSet, Subspace, intersect_subspaces, same_subspace

CONT_TOL = 1e-9


class ContinuityConflict(ValueError):
    """Parent pieces prescribe different values on a shared carrier."""


class DegreeInfeasible(ValueError):
    def __init__(self, msg: str, degree: int):
        super().__init__(f"{msg}; try degree {degree + 1}")
        self.degree = degree
        self.suggested = degree + 1


class DegreeCapExceeded(ValueError):
    pass


def _check_degree(r: int):
    if r > MAX_DEGREE:
        raise DegreeCapExceeded(f"degree {r} exceeds the cap {MAX_DEGREE}")


# ---------------------------------------------------------------- pieces


@dataclass(frozen=True)
class PiecewiseFn:
    partition: Partition
    pieces: tuple
    degree: int

    @property
    def nvars(self) -> int:
        return self.partition.subspaces[0].ambient_dim

    def __call__(self, x) -> float:
        i = self.partition.class_index(x)
        return float(self.pieces[i].to_float().eval(np.asarray(x, float)))

    def eval_many(self, X) -> np.ndarray:
        return np.array([self(x) for x in np.asarray(X, float)])

    def __add__(self, other: PiecewiseFn) -> PiecewiseFn:
        return PiecewiseFn(self.partition, tuple(a + b for a, b in zip(self.pieces, other.pieces)),
                           max(self.degree, other.degree))

    def scaled(self, c) -> PiecewiseFn:
        return PiecewiseFn(self.partition, tuple(p * c for p in self.pieces), self.degree)

    def to_float(self) -> PiecewiseFn:
        return PiecewiseFn(self.partition, tuple(p.to_float() for p in self.pieces), self.degree)

    def vector(self, r: int | None = None) -> list:
        """Coefficients, class-major, in ``monomials_upto`` order."""
        r = self.degree if r is None else r
        mons = monomials_upto(self.nvars, r)
        out = []
        for p in self.pieces:
            if p.degree() > r:
                raise ValueError(f"piece of degree {p.degree()} does not fit degree {r}")
            out.extend(p.coeff(m) for m in mons)
        return out

    @classmethod
    def from_vector(cls, partition: Partition, vec, r: int, exact: bool) -> PiecewiseFn:
        n = partition.subspaces[0].ambient_dim
        mons = monomials_upto(n, r)
        M = len(mons)
        pieces = []
        for i in range(partition.size):
            terms = {m: vec[i * M + j] for j, m in enumerate(mons)}
            if not exact:
                terms = {m: float(v) for m, v in terms.items()}
            pieces.append(SparsePoly(terms, n, exact))
        return cls(partition, tuple(pieces), r)

    def boundary_difference(self, row) -> SparsePoly:
        """``p_hi - p_lo`` restricted to the row's boundary carrier."""
        diff = self.pieces[row.hi] - self.pieces[row.lo]
        return restrict_to_span(diff, row.boundary.gens)

    def is_continuous(self, incidence: IncidenceMatrix, tol: float = CONT_TOL) -> bool:
        for row in incidence.rows:
            d = self.boundary_difference(row)
            if d.exact and not d.is_zero():
                return False
            if not d.exact and d.max_abs_coeff() > tol:
                return False
        return True

    def continuity_residual(self, incidence: IncidenceMatrix, n_samples: int = 100, seed: int = 0,
                            radius: float = 2.0) -> float:
        """Max of ``|p_hi - p_lo|`` over points sampled on each boundary carrier."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for row in incidence.rows:
            C = row.boundary
            hi, lo = self.pieces[row.hi].to_float(), self.pieces[row.lo].to_float()
            T = rng.uniform(-radius, radius, size=(n_samples, C.dim))
            X = T @ C.basis.T if C.dim else np.zeros((n_samples, self.nvars))
            worst = max(worst, float(np.max(np.abs(hi.eval_many(X) - lo.eval_many(X)))))
        return worst

    def to_dict(self) -> dict:
        return {"degree": self.degree, "pieces": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_dict(cls, data, partition: Partition) -> PiecewiseFn:
        n = partition.subspaces[0].ambient_dim
        return cls(partition, tuple(SparsePoly.from_json(p, n) for p in data["pieces"]), int(data["degree"]))


def peaked_piece(value: float, centers: Sequence, curvature: float = 1.0) -> SparsePoly:
    """Polynomial maximized exactly at ``centers`` with maximum ``value``.

    One center gives ``value - κ|x - c|^2``.  Several centers give
    ``value - κ prod_i |x - c_i|^2``, of degree ``2 * len(centers)``; this is a
    valid interpolant but not of minimal degree in general.
    """
    centers = [np.asarray(c, float) for c in centers]
    n = len(centers[0])
    prod = SparsePoly.constant(1.0, n, False)
    for c in centers:
        prod = prod * squared_distance_poly(c, exact=False)
    if prod.degree() > MAX_DEGREE:
        raise DegreeCapExceeded(f"{len(centers)} maxima need a degree {prod.degree()} piece")
    return SparsePoly.constant(float(value), n, False) - prod * float(curvature)


def _extension(piece: SparsePoly, carrier: Subspace) -> SparsePoly:
    """``piece(P x) - |x - P x|^2`` with ``P`` the projector onto ``carrier``."""
    n = piece.nvars
    P = carrier.projector
    on = piece.to_float().compose_linear(P)
    Q = np.eye(n) - P
    xs = SparsePoly.gens(n, False)
    off = SparsePoly.zero(n, False)
    for i in range(n):
        for j in range(n):
            if abs(Q[i, j]) > 1e-15:
                off = off + xs[i] * xs[j] * float(Q[i, j])
    return (on - off).chop(1e-13)


# ---------------------------------------------------------------- degree


def count_maxima(problems: Sequence[LocalProblem], partition: Partition) -> list[int]:
    """Distinct local maxima lying in each class's carrier."""
    pts = _distinct([x for p in problems for x in p.solutions])
    return [sum(1 for x in pts if c.carrier.contains(x, FEAS_TOL)) for c in partition.classes]


def _distinct(points, tol: float = DISTINCT_TOL):
    out = []
    for x in sorted((np.asarray(x, float) for x in points), key=tuple):
        if all(np.linalg.norm(x - y) > tol for y in out):
            out.append(x)
    return out


def choose_degree(problems: Sequence[LocalProblem], partition: Partition) -> int:
    """Highest number of maxima in an intersection class, floored at 2.

    Returns 0 only when no problem has a maximum at all.
    """
    if not any(p.solutions for p in problems):
        return 0
    counts = count_maxima(problems, partition)
    inter = [c for c, cl in zip(counts, partition.classes) if cl.kind == "intersection"]
    return max([2] + inter)


# ---------------------------------------------------------------- continuity system


@dataclass(frozen=True)
class ContinuitySystem:
    rows: list
    n_unknowns: int
    degree: int
    blocks: tuple  # number of scalar constraints contributed by each incidence row

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.n_unknowns)


def _restriction_table(carrier: Subspace, mons, r: int):
    """Coefficient matrix of each ambient monomial restricted to ``carrier``."""
    n = carrier.ambient_dim
    sub = monomials_upto(carrier.dim, r)
    idx = {m: i for i, m in enumerate(sub)}
    table = []
    for m in mons:
        q = restrict_to_span(SparsePoly({m: 1}, n, True), carrier.gens)
        col = [Fraction(0)] * len(sub)
        for mm, c in q.terms.items():
            col[idx[mm]] = c
        table.append(col)
    return table, sub


def continuity_system(partition: Partition, incidence: IncidenceMatrix, r: int) -> ContinuitySystem:
    """Exact linear constraints ``restrict(p_hi - p_lo, boundary) = 0``.

    Unknowns are the coefficients of all pieces, ``λ · C(n+r, r)`` of them.
    """
    _check_degree(r)
    n = partition.subspaces[0].ambient_dim
    mons = monomials_upto(n, r)
    M = len(mons)
    N = partition.size * M
    rows, blocks = [], []
    cache: dict = {}
    for row in incidence.rows:
        key = tuple(map(tuple, row.boundary.gens))
        if key not in cache:
            cache[key] = _restriction_table(row.boundary, mons, r)
        table, sub = cache[key]
        for k in range(len(sub)):
            eq = [Fraction(0)] * N
            for j in range(M):
                c = table[j][k]
                if c:
                    eq[row.hi * M + j] += c
                    eq[row.lo * M + j] -= c
            rows.append(eq)
        blocks.append(len(sub))
    return ContinuitySystem(rows, N, r, tuple(blocks))


def _kernel(system: ContinuitySystem):
    """Exact reduced-echelon nullspace and its free columns."""
    N = system.n_unknowns
    if not system.rows:
        return [[Fraction(int(i == j)) for i in range(N)] for j in range(N)], list(range(N))
    R, pivots = _exact.rref(system.rows, N)
    pivset = set(pivots)
    free = [c for c in range(N) if c not in pivset]
    basis = []
    for f in free:
        v = [Fraction(0)] * N
        v[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis, free


def kernel_basis(partition: Partition, incidence: IncidenceMatrix, r: int) -> list[PiecewiseFn]:
    """Basis of the continuous piecewise polynomials of degree <= r.

    Each element has a 1 in one free coefficient and 0 in the others, so
    the basis is canonical for the given class and monomial ordering.
    """
    basis, _ = _kernel(continuity_system(partition, incidence, r))
    return [PiecewiseFn.from_vector(partition, v, r, exact=True) for v in basis]


# ---------------------------------------------------------------- complement fit


@dataclass(frozen=True)
class AlphaFit:
    poly: SparsePoly
    residual: float  # constraint residual
    n_constraints: int
    n_free: int
    sample_rmse: float


def _design(X: np.ndarray, mons) -> np.ndarray:
    if len(X) == 0:
        return np.zeros((0, len(mons)))
    return np.stack([np.prod(X ** np.array(m, float), axis=1) for m in mons], axis=1)


def fit_alpha(
    partition: Partition,
    incidence: IncidenceMatrix,
    pieces: dict,
    r: int,
    samples: np.ndarray | None = None,
    target: SparsePoly | None = None,
) -> AlphaFit:
    """Complement piece of degree <= r matching every adjacent lower piece.

    The continuity constraints (restriction to each boundary carrier) are
    imposed exactly as an equality-constrained least-squares problem; the
    remaining freedom is fitted to ``target`` at ``samples``.  Raises
    :class:`DegreeInfeasible` when no degree-r polynomial satisfies the
    constraints.
    """
    _check_degree(r)
    n = partition.subspaces[0].ambient_dim
    alpha = next(i for i, c in enumerate(partition.classes) if c.kind == "complement")
    mons = monomials_upto(n, r)
    M = len(mons)
    C_rows, rhs = [], []
    for row in incidence.rows:
        if row.hi != alpha:
            continue
        low = restrict_to_span(pieces[row.lo].to_float(), row.boundary.gens)
        rr = max(r, int(max(low.degree(), 0)))
        table, sub = _restriction_table(row.boundary, mons, rr)
        for k, sm in enumerate(sub):
            C_rows.append([table[j][k] for j in range(M)])
            rhs.append(float(low.coeff(sm)))
    rhs = np.array(rhs, float)
    scale = max(1.0, float(np.max(np.abs(rhs)))) if len(rhs) else 1.0
    if C_rows:
        Cf = np.array([[float(v) for v in row] for row in C_rows])
        x0 = np.linalg.lstsq(Cf, rhs, rcond=None)[0]
        residual = float(np.max(np.abs(Cf @ x0 - rhs)))
        if residual > CONT_TOL * scale:
            raise DegreeInfeasible(
                f"continuity constraints of the complement piece are inconsistent at degree {r} "
                f"(residual {residual:.3g})", r)
        N = np.array([[float(v) for v in b] for b in _exact.nullspace(C_rows, M)]).reshape(-1, M).T
    else:
        x0 = np.zeros(M)
        residual = 0.0
        N = np.eye(M)
    rmse = 0.0
    X = np.zeros((0, n)) if samples is None else np.asarray(samples, float)
    if target is not None and len(X) and N.shape[1]:
        Phi = _design(X, mons)
        y = target.to_float().eval_many(X)
        z = np.linalg.lstsq(Phi @ N, y - Phi @ x0, rcond=None)[0]
        coef = x0 + N @ z
        rmse = float(np.sqrt(np.mean((Phi @ coef - y) ** 2)))
    else:
        coef = x0
    if C_rows:
        coef = coef - np.linalg.lstsq(Cf, Cf @ coef - rhs, rcond=None)[0]
        residual = float(np.max(np.abs(Cf @ coef - rhs)))
    poly = SparsePoly({m: float(c) for m, c in zip(mons, coef)}, n, False).chop(1e-13)
    return AlphaFit(poly, residual, len(C_rows), int(N.shape[1]), rmse)


# ---------------------------------------------------------------- canonical pieces


def _problems_by_class(problems, partition):
    groups = {i: [] for i, c in enumerate(partition.classes) if c.kind == "pure"}
    for p in problems:
        i = partition.find(p.carrier)
        if i is None or i not in groups:
            raise ValueError(f"problem {p.id!r} has no pure class")
        groups[i].append(p)
    return groups


def lower_pieces(problems: Sequence[LocalProblem], partition: Partition,
                 incidence: IncidenceMatrix) -> dict:
    """Pieces of the pure and intersection classes.

    Pure classes get :func:`peaked_piece` at the best local solutions;
    intersection classes inherit the (common) restriction of their parents.
    When unit-curvature peaks disagree and the only intersection is the
    origin, the curvatures are rescaled to a common value there.
    """
    chosen = {}
    for i, ps in _problems_by_class(problems, partition).items():
        best = max(p.best_value() for p in ps)
        top = [p for p in ps if p.best_value() >= best - VALUE_TOL]
        chosen[i] = (top[0], [x for p in top for x in p.solutions])
    snap = _shared_maxima({i: pts for i, (_, pts) in chosen.items()}, partition)
    peaks: dict = {}
    for i, (p, pts) in chosen.items():
        centers = _distinct([snap(x) for x in pts])
        peaks[i] = (max(p.value(c) for c in centers), centers)
    pieces = {i: peaked_piece(v, cs) for i, (v, cs) in peaks.items()}
    try:
        return _inherit(pieces, partition, incidence)
    except ContinuityConflict:
        inter = [c for c in partition.classes if c.kind == "intersection"]
        if not inter or any(c.dim for c in inter):
            raise
    return _inherit(_origin_matched(peaks), partition, incidence)


def _shared_maxima(points: dict, partition: Partition):
    """Map each maximum to one representative per cluster.

    Classes solved separately locate a shared maximum only up to solver
    accuracy; the representative is the cluster mean projected onto the
    intersection of the carriers involved, so restrictions agree there.
    """
    clusters: list = []  # [points, classes]
    for i, pts in points.items():
        for x in pts:
            x = np.asarray(x, float)
            for c in clusters:
                if np.linalg.norm(x - c[0][0]) <= DISTINCT_TOL:
                    c[0].append(x)
                    c[1].add(i)
                    break
            else:
                clusters.append([[x], {i}])
    reps = []
    for pts, owners in clusters:
        S = intersect_subspaces([partition.classes[i].carrier for i in sorted(owners)])
        reps.append((pts, S.projector @ np.mean(pts, axis=0) if len(pts) > 1 else pts[0]))

    def snap(x):
        x = np.asarray(x, float)
        for pts, rep in reps:
            if any(x is q or np.array_equal(x, q) for q in pts):
                return rep
        return x

    return snap


def _origin_matched(peaks: dict) -> dict:
    """Peaks ``v_k - κ_k g_k`` with ``κ_k > 0`` chosen to agree at the origin."""
    at0 = {i: float(np.prod([c @ c for c in cs])) for i, (v, cs) in peaks.items()}
    pinned = [i for i, g in at0.items() if g < 1e-18]
    if pinned:
        level = peaks[pinned[0]][0]
    else:
        level = min(peaks[i][0] - at0[i] for i in peaks)
    out = {}
    for i, (v, cs) in peaks.items():
        if i in pinned:
            out[i] = peaked_piece(v, cs)
            continue
        kappa = (v - level) / at0[i]
        if kappa <= 0:
            raise ContinuityConflict(
                f"a maximum at the origin of value {level:.6g} exceeds the local optimum {v:.6g}")
        out[i] = peaked_piece(v, cs, kappa)
    return out


def _inherit(pieces: dict, partition: Partition, incidence: IncidenceMatrix) -> dict:
    pieces = dict(pieces)
    cls = partition.classes
    inter = sorted((i for i, c in enumerate(cls) if c.kind == "intersection"), key=lambda i: -cls[i].dim)
    for i in inter:
        parents = [row.hi for row in incidence.rows if row.lo == i and row.hi in pieces]
        if not parents:
            raise ContinuityConflict(f"class {cls[i].name()} has no parent piece")
        base = pieces[parents[0]]
        for j in parents[1:]:
            d = restrict_to_span(base - pieces[j], cls[i].carrier.gens)
            scale = max(1.0, base.max_abs_coeff(), pieces[j].max_abs_coeff())
            if d.max_abs_coeff() > CONT_TOL * scale:
                raise ContinuityConflict(
                    f"pieces of classes {cls[parents[0]].name()} and {cls[j].name()} disagree on "
                    f"{cls[i].name()} (max coefficient gap {d.max_abs_coeff():.3g})")
        pieces[i] = base
    return pieces


def moebius_target(partition: Partition, pieces: dict) -> SparsePoly:
    """Inclusion-exclusion of the peaked extensions of the lower pieces.

    Each data class ``F`` contributes ``w_F · ext_F`` with ``ext_F(x) =
    p_F(P_F x) - dist(x, F)^2`` and weights ``w_F = 1 - Σ_{G ⊋ F} w_G``, so
    overlapping contributions are counted once.
    """
    cls = partition.classes
    data = sorted(pieces, key=lambda i: -cls[i].dim)
    w: dict = {}
    for i in data:
        above = [j for j in w if cls[j].dim > cls[i].dim and cls[j].carrier.contains_subspace(cls[i].carrier)]
        w[i] = 1 - sum(w[j] for j in above)
    n = partition.subspaces[0].ambient_dim
    total = SparsePoly.zero(n, False)
    for i in data:
        if w[i]:
            total = total + _extension(pieces[i], cls[i].carrier) * float(w[i])
    return total.chop(1e-12)


def canonical_pieces(
    problems: Sequence[LocalProblem],
    partition: Partition,
    incidence: IncidenceMatrix,
    r: int,
    samples: np.ndarray | None = None,
) -> tuple[PiecewiseFn, AlphaFit | None]:
    pieces = lower_pieces(problems, partition, incidence)
    for i, p in pieces.items():
        if p.degree() > r:
            raise DegreeInfeasible(
                f"class {partition.classes[i].name()} needs a degree {int(p.degree())} piece", r)
    fit = None
    alpha = [i for i, c in enumerate(partition.classes) if c.kind == "complement"]
    if alpha:
        fit = fit_alpha(partition, incidence, pieces, r, samples, moebius_target(partition, pieces))
        pieces[alpha[0]] = fit.poly
    ordered = tuple(pieces[i] for i in range(partition.size))
    return PiecewiseFn(partition, ordered, r), fit


# ---------------------------------------------------------------- V and its maxima


def assemble_V(generators: Sequence[PiecewiseFn], weights=None, partition: Partition | None = None):
    """``V = Σ_j w_j f_j``; plain sum when ``weights`` is None.

    Returns ``(V, empty)``.  An empty generator list gives the zero function
    (needs ``partition``) with ``empty=True``.
    """
    if not generators:
        if partition is None:
            raise ValueError("empty generator list needs a partition")
        n = partition.subspaces[0].ambient_dim
        zero = tuple(SparsePoly.zero(n, False) for _ in partition.classes)
        return PiecewiseFn(partition, zero, 0), True
    ws = [1] * len(generators) if weights is None else list(weights)
    V = None
    for g, w in zip(generators, ws):
        t = g.to_float().scaled(float(w)) if weights is not None else g
        V = t if V is None else V + t
    V = PiecewiseFn(V.partition, tuple(p.chop(1e-13) if not p.exact else p for p in V.pieces), V.degree)
    return V, False


@dataclass(frozen=True)
class MaximalElements:
    points: list
    values: list
    classes: list
    degenerate: bool


def maximize_V(V: PiecewiseFn, region: FeasibleSet, step: float = 1e-2) -> MaximalElements:
    """One maximizer per class (over the closure of the class inside the
    region), keeping classes within 1e-6 of the best value."""
    found = []
    all_const = all(p.degree() <= 0 for p in V.pieces)
    for i, c in enumerate(V.partition.classes):
        C = c.carrier
        try:
            sec = region.section(C)
        except EmptyFeasibleSet:
            continue
        q = restrict(V.pieces[i].to_float(), C)
        if C.dim == 0:
            x = np.zeros(C.ambient_dim)
            if region.contains(x):
                found.append((float(q.eval(np.zeros(0))) if q.terms else 0.0, x, i, True))
            continue
        res = maximize_on_shape(q, sec.shape, step)
        x = sec.ambient(res.points[0])
        found.append((res.certificate.value, x, i, res.certificate.degenerate))
    if not found:
        raise EmptyFeasibleSet("region meets no class")
    best = max(f[0] for f in found)
    keep = []
    for v, x, i, deg in sorted(found, key=lambda f: (-f[0], f[2])):
        if v < best - VALUE_TOL:
            continue
        if all(np.linalg.norm(x - y[1]) > DISTINCT_TOL for y in keep):
            keep.append((v, x, i, deg))
    keep.sort(key=lambda f: tuple(f[1]))
    degenerate = all_const or all(k[3] and V.partition.classes[k[2]].dim > 0 for k in keep)
    return MaximalElements([k[1] for k in keep], [k[0] for k in keep], [k[2] for k in keep], degenerate)


# ---------------------------------------------------------------- state


def default_box(problems: Sequence[LocalProblem], scale: float = 1.5):
    """Bounding box of all feasible sets scaled by ``scale`` about its center.

    Flat directions borrow the widest extent so the box is never degenerate.
    """
    los, his = zip(*(p.feasible.bounding_box() for p in problems))
    lo, hi = np.min(los, axis=0), np.max(his, axis=0)
    w = hi - lo
    wmax = float(np.max(w)) if np.max(w) > 0 else 1.0
    w = np.where(w > 1e-12, w, wmax)
    mid = (lo + hi) / 2
    return mid - scale * w / 2, mid + scale * w / 2


def check_family(problems: Sequence[LocalProblem]):
    """Pairwise agreement of utilities on common subspaces."""
    for a in range(len(problems)):
        for b in range(a + 1, len(problems)):
            p, q = problems[a], problems[b]
            S = intersect_subspaces([p.carrier, q.carrier])
            if not restrictions_agree(p.utility, q.utility, S):
                raise IncompatibleFamily(Incompatible(
                    f"utilities of {p.id!r} and {q.id!r} differ on their common subspace", (p.id, q.id)))


def _unique_carriers(problems):
    out = []
    for p in problems:
        if not any(same_subspace(p.carrier, S) for S in out):
            out.append(p.carrier)
    return out


@dataclass(frozen=True)
class SurrogateState:
    problems: tuple
    partition: Partition
    incidence: IncidenceMatrix
    degree: int  # degree law value
    working_degree: int  # degree of the family actually built
    kernel: tuple  # exact basis of the degree-slice of continuous functions
    coefficients: tuple  # V = Σ coefficients[j] * kernel[j]
    V: PiecewiseFn
    maximal: MaximalElements
    region: FeasibleSet
    info: dict = field(default_factory=dict)

    @property
    def lam(self) -> int:
        return self.partition.size

    @property
    def tau(self) -> int:
        return self.incidence.tau

    @property
    def mu(self) -> int:
        return len(self.maximal.points)

    @property
    def maximal_elements(self) -> list:
        return self.maximal.points

    def generators(self) -> list[PiecewiseFn]:
        """The data-scaled generators ``c_j b_j`` whose sum is V."""
        return [b.to_float().scaled(c) for b, c in zip(self.kernel, self.coefficients) if c]

    def to_dict(self) -> dict:
        from .serialize import feasible_to_dict, problem_to_dict

        return {
            "problems": [problem_to_dict(p) for p in self.problems],
            "partition": self.partition.to_dict(),
            "incidence": self.incidence.to_dict(),
            "degree": self.degree,
            "working_degree": self.working_degree,
            "lambda": self.lam,
            "tau": self.tau,
            "mu": self.mu,
            "kernel_basis": [[f"{v.numerator}/{v.denominator}" for v in b.vector()] for b in self.kernel],
            "coefficients": [float(c) for c in self.coefficients],
            "V": self.V.to_dict(),
            "maximal_elements": [list(map(float, x)) for x in self.maximal.points],
            "maximal_values": [float(v) for v in self.maximal.values],
            "maximal_classes": list(self.maximal.classes),
            "degenerate": self.maximal.degenerate,
            "region": feasible_to_dict(self.region),
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d) -> SurrogateState:
        from .serialize import SchemaError, feasible_from_dict, problem_from_dict

        try:
            partition = Partition.from_dict(d["partition"])
            n = partition.subspaces[0].ambient_dim
            problems = tuple(problem_from_dict(p, n, f"$.problems[{i}]") for i, p in enumerate(d["problems"]))
            incidence = IncidenceMatrix.from_dict(d["incidence"], partition)
            wd = int(d["working_degree"])
            kernel = tuple(PiecewiseFn.from_vector(partition, [_exact.to_fraction(v) for v in b], wd, True)
                           for b in d["kernel_basis"])
            V = PiecewiseFn.from_dict(d["V"], partition)
            maximal = MaximalElements([np.array(x, float) for x in d["maximal_elements"]],
                                      [float(v) for v in d["maximal_values"]],
                                      [int(i) for i in d["maximal_classes"]], bool(d["degenerate"]))
            region = feasible_from_dict(d["region"], Subspace.full(n), "$.region")
            return cls(problems, partition, incidence, int(d["degree"]), wd, kernel,
                       tuple(float(c) for c in d["coefficients"]), V, maximal, region, dict(d["info"]))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise SchemaError("$", f"corrupted snapshot ({type(e).__name__}: {e})") from e


def build_surrogate(
    problems: Sequence[LocalProblem],
    region: FeasibleSet | None = None,
    degree: int | None = None,
    samples: int = 2000,
    seed: int = 0,
    step: float = 1e-2,
) -> SurrogateState:
    """Run the whole pipeline on a compatible family of local problems."""
    problems = tuple(p if p.solved else solve_local(p, step) for p in problems)
    if not problems:
        raise ValueError("need at least one problem")
    check_family(problems)
    partition = build_partition(_unique_carriers(problems))
    incidence = build_incidence(partition)
    r = choose_degree(problems, partition)
    lo, hi = default_box(problems)
    region_given = region is not None
    if region is None:
        region = FeasibleSet.box(Subspace.full(partition.subspaces[0].ambient_dim), lo, hi)
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(samples, len(lo)))
    if degree is None:
        base = lower_pieces(problems, partition, incidence)
        wd = max([r] + [int(p.degree()) for p in base.values()])
    else:
        wd = degree
    _check_degree(wd)
    f0, fit = canonical_pieces(problems, partition, incidence, wd, X)
    basis, free = _kernel(continuity_system(partition, incidence, wd))
    v = np.array([float(c) for c in f0.vector(wd)])
    coef = [v[f] for f in free]
    recon = np.zeros_like(v)
    for b, c in zip(basis, coef):
        if c:
            recon += c * np.array([float(t) for t in b])
    decomp = float(np.max(np.abs(recon - v))) if len(v) else 0.0
    if decomp > 1e-9 * max(1.0, float(np.max(np.abs(v)))):
        raise ContinuityConflict(f"canonical pieces are not continuous (residual {decomp:.3g})")
    kernel = tuple(PiecewiseFn.from_vector(partition, b, wd, True) for b in basis)
    # Σ c_j b_j equals f0 up to the residual above; f0 itself is kept so that
    # pieces untouched by an update stay bit-identical
    V = PiecewiseFn(partition, tuple(p.to_float() for p in f0.pieces), wd)
    empty = not kernel
    maximal = maximize_V(V, region, step)
    if len(maximal.points) > partition.size:
        raise AssertionError("more maximal elements than classes")
    info = {
        "seed": seed,
        "samples": samples,
        "sample_box": [list(map(float, lo)), list(map(float, hi))],
        "region_given": region_given,
        "alpha_constraint_residual": fit.residual if fit else 0.0,
        "alpha_sample_rmse": fit.sample_rmse if fit else 0.0,
        "decomposition_residual": decomp,
        "empty_basis": empty,
        "unknowns": partition.size * len(monomials_upto(partition.subspaces[0].ambient_dim, wd)),
    }
    return SurrogateState(problems, partition, incidence, r, wd, kernel, tuple(coef), V, maximal,
                          region, info)


# ---------------------------------------------------------------- evolution


@dataclass(frozen=True)
class EvolutionReport:
    unchanged: bool
    degree_before: int
    degree_after: int
    degree_step_ok: bool
    stability_max_diff: float
    stability_points: int
    stability_ok: bool

    def to_dict(self):
        return {
            "unchanged": self.unchanged,
            "degree_before": self.degree_before,
            "degree_after": self.degree_after,
            "degree_step_ok": self.degree_step_ok,
            "stability_max_diff": self.stability_max_diff,
            "stability_points": self.stability_points,
            "stability_ok": self.stability_ok,
            "verdict": "PASS" if self.degree_step_ok and self.stability_ok else "FAIL",
        }


def _same_problem(p: LocalProblem, q: LocalProblem) -> bool:
    return (same_subspace(p.carrier, q.carrier)
            and p.feasible.contains_set_of(q.feasible) and q.feasible.contains_set_of(p.feasible)
            and restrictions_agree(p.utility, q.utility, p.carrier))


def stability_check(old: SurrogateState, new: SurrogateState, new_carrier: Subspace,
                    n_points: int = 1000, seed: int = 0, tol: float = CONT_TOL):
    """Compare old and new V on points of the old data subspaces off ``new_carrier``."""
    rng = np.random.default_rng(seed)
    lo, hi = old.info.get("sample_box", default_box(old.problems))
    R = float(np.max(np.abs(np.concatenate([lo, hi]))))
    carriers = [c.carrier for c in old.partition.classes if c.kind == "pure"]
    carriers = [C for C in carriers if C.dim > 0 and not new_carrier.contains_subspace(C)]
    if not carriers:
        return 0.0, 0, True
    worst, count = 0.0, 0
    while count < n_points:
        C = carriers[int(rng.integers(len(carriers)))]
        x = C.embed(rng.uniform(-R, R, C.dim))
        if new_carrier.contains(x, 1e-9):
            continue
        d = abs(old.V(x) - new.V(x))
        scale = max(1.0, abs(old.V(x)))
        worst = max(worst, d / scale)
        count += 1
    return worst, count, worst <= tol


def evolve(state: SurrogateState, new_problem: LocalProblem, samples: int | None = None,
           seed: int | None = None, step: float = 1e-2) -> tuple[SurrogateState, EvolutionReport]:
    """Add a local problem and rebuild the family on the refined partition."""
    if not new_problem.solved:
        new_problem = solve_local(new_problem, step)
    if any(_same_problem(new_problem, p) for p in state.problems):
        rep = EvolutionReport(True, state.degree, state.degree, True, 0.0, 0, True)
        return state, rep
    check_family(state.problems + (new_problem,))
    region = state.region if state.info.get("region_given") else None
    new = build_surrogate(state.problems + (new_problem,), region,
                          samples=state.info.get("samples", 2000) if samples is None else samples,
                          seed=state.info.get("seed", 0) if seed is None else seed, step=step)
    ok = new.degree in (state.degree, state.degree + 1)
    worst, count, stable = stability_check(state, new, new_problem.carrier,
                                           seed=new.info["seed"])
    return new, EvolutionReport(False, state.degree, new.degree, ok, worst, count, stable)


# ---------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceReport:
    x_hat: np.ndarray
    rows: list
    m_hat: int | None
    plateau: bool
    converged_at_cover: bool | None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "distance", "r", "lambda", "tau", "mu", "covered", "m_hat"])
        for row in self.rows:
            w.writerow([row["m"], "%.17g" % row["distance"], row["r"], row["lambda"], row["tau"],
                        row["mu"], int(row["covered"]), int(row["m"] == self.m_hat)])
        return buf.getvalue()

    def to_dict(self):
        return {"x_hat": list(map(float, self.x_hat)), "rows": self.rows, "m_hat": self.m_hat,
                "plateau": self.plateau, "converged_at_cover": self.converged_at_cover}


def convergence_run(
    U: SparsePoly,
    problems: Sequence[LocalProblem],
    region: FeasibleSet,
    budget: int | None = None,
    samples: int = 2000,
    seed: int = 0,
    step: float = 1e-2,
    tol: float = 1e-6,
) -> ConvergenceReport:
    """Feed problems one at a time and track the distance of the nearest
    maximal element of V to the true maximizer of ``U`` over ``region``."""
    full = maximize_on_shape(U.to_float().compose_linear(region.carrier.basis), region.shape, step)
    x_hat = region.ambient(full.points[0])
    seq = list(problems)[: budget if budget is not None else None]
    rows, state, m_hat = [], None, None
    for m, p in enumerate(seq):
        p = p if p.solved else solve_local(p, step)
        if state is None:
            state = build_surrogate([p], region, samples=samples, seed=seed, step=step)
        else:
            state, _ = evolve(state, p, step=step)
        dist = min(float(np.linalg.norm(x - x_hat)) for x in state.maximal.points)
        covered = any(q.feasible.contains(x_hat, FEAS_TOL) for q in state.problems)
        if covered and m_hat is None:
            m_hat = m
        rows.append({"m": m, "distance": dist, "r": state.degree, "lambda": state.lam,
                     "tau": state.tau, "mu": state.mu, "covered": covered})
    reached = any(r["distance"] <= tol for r in rows)
    at_cover = None if m_hat is None else rows[m_hat]["distance"] <= tol
    return ConvergenceReport(x_hat, rows, m_hat, not reached, at_cover)
