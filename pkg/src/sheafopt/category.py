"""Local problems, their morphisms, meets, the glued problem, and
sample-based checks of the presheaf and gluing (equalizer) conditions.

The valuation of a solved problem ``s`` is the set of ambient points ``x``
whose Γ-image lies in the solution set of ``s``.  These sets are unbounded
in general, so they are only ever represented by the membership predicate
:func:`in_F`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Sequence

import numpy as np

from .polynomial import SparsePoly, poly_equal, restrict_to_span
from .space import (
    FEAS_TOL,
    EmptyFeasibleSet,
    FeasibleSet,
    Subspace,
    as_vector,
    gamma,
    intersect_subspaces,
    project,
    sum_subspaces,
)

MEMBERSHIP_TOL = 1e-9


class UnsolvedProblem(ValueError):
    pass


class IncompatibleFamily(ValueError):
    def __init__(self, incompatible: "Incompatible"):
        super().__init__(incompatible.reason)
        self.incompatible = incompatible


@dataclass(frozen=True)
class LocalProblem:
    """Maximize ``utility`` (a polynomial in ambient variables) over ``feasible``."""

    id: str
    feasible: FeasibleSet
    utility: SparsePoly
    solutions: tuple | None = None
    certificate: object = None

    def __post_init__(self):
        if self.utility.nvars != self.feasible.ambient_dim:
            raise ValueError(
                f"utility of problem {self.id!r} has {self.utility.nvars} variables, "
                f"ambient dimension is {self.feasible.ambient_dim}"
            )
        if self.solutions is not None:
            sols = tuple(as_vector(x, self.feasible.ambient_dim) for x in self.solutions)
            for x in sols:
                if not self.feasible.contains(x, FEAS_TOL):
                    raise ValueError(f"solution {x} of problem {self.id!r} is infeasible")
            object.__setattr__(self, "solutions", sols)

    @property
    def carrier(self) -> Subspace:
        return self.feasible.carrier

    @property
    def solved(self) -> bool:
        return self.solutions is not None

    def with_solutions(self, points, certificate=None) -> LocalProblem:
        return replace(self, solutions=tuple(points), certificate=certificate)

    def value(self, x) -> float:
        return float(self.utility.to_float().eval(as_vector(x)))

    def best_value(self) -> float:
        self._require_solved()
        return max(self.value(x) for x in self.solutions)

    def _require_solved(self):
        if self.solutions is None:
            raise UnsolvedProblem(f"problem {self.id!r} has not been solved")


@dataclass(frozen=True)
class MorphismWitness:
    source: str
    target: str
    containment: bool
    restriction_equal: bool
    dim_leq: bool

    @property
    def exists(self) -> bool:
        return self.containment and self.restriction_equal and self.dim_leq


@dataclass(frozen=True)
class Incompatible:
    reason: str
    pair: tuple = ()
    point: np.ndarray | None = None

    def to_dict(self):
        return {"reason": self.reason, "pair": list(self.pair),
                "point": None if self.point is None else [float(v) for v in self.point]}


def restrictions_agree(p: SparsePoly, q: SparsePoly, S: Subspace, tol: float = 1e-9) -> bool:
    """Whether ``p`` and ``q`` coincide on ``S``.

    Decided symbolically (any spanning basis of ``S`` will do) when both
    polynomials are exact, otherwise by coefficients with tolerance.
    """
    if S.dim == 0:
        zero = [0] * p.nvars
        if p.exact and q.exact:
            return p.eval(zero) == q.eval(zero)
        return abs(float(p.eval(zero)) - float(q.eval(zero))) <= tol
    if p.exact and q.exact:
        return poly_equal(restrict_to_span(p, S.gens), restrict_to_span(q, S.gens))
    B = S.basis
    gens = [B[:, j] for j in range(S.dim)]
    return poly_equal(restrict_to_span(p.to_float(), gens), restrict_to_span(q.to_float(), gens), tol)


def check_morphism(s_k: LocalProblem, s_j: LocalProblem) -> MorphismWitness:
    if s_k.feasible.ambient_dim != s_j.feasible.ambient_dim:
        raise ValueError("problems live in different ambient spaces")
    return MorphismWitness(
        source=s_k.id,
        target=s_j.id,
        containment=s_j.feasible.contains_set_of(s_k.feasible),
        restriction_equal=restrictions_agree(s_j.utility, s_k.utility, s_k.carrier),
        dim_leq=s_k.carrier.dim <= s_j.carrier.dim,
    )


def _disagreement_point(p, q, F: FeasibleSet):
    rng = np.random.default_rng(0)
    try:
        pts = F.sample(rng, 32)
    except Exception:
        return None
    pf, qf = p.to_float(), q.to_float()
    diffs = np.abs(pf.eval_many(pts) - qf.eval_many(pts))
    return pts[int(np.argmax(diffs))]


def meet(s_k: LocalProblem, s_j: LocalProblem) -> LocalProblem | Incompatible:
    """The problem on ``L̂^k ∩ L̂^j``; raises EmptyFeasibleSet if they do not meet."""
    F = s_k.feasible.intersect(s_j.feasible)
    if not restrictions_agree(s_k.utility, s_j.utility, F.carrier):
        return Incompatible(
            f"utilities of {s_k.id!r} and {s_j.id!r} differ on their common subspace",
            (s_k.id, s_j.id),
            _disagreement_point(s_k.utility, s_j.utility, F),
        )
    if s_k is s_j or (s_k.id == s_j.id and s_k.feasible is s_j.feasible):
        return s_k
    return LocalProblem(f"{s_k.id}^{s_j.id}", F, s_k.utility)


@dataclass(frozen=True)
class StarProblem:
    """The glued problem on the union of the feasible sets.

    ``top`` is the member whose feasible set contains all the others, when
    there is one; ``problem`` is then that member carrying the glued
    solutions.
    """

    problems: tuple
    carrier: Subspace
    solutions: tuple
    value: float
    top: str | None = None

    @property
    def problem(self) -> LocalProblem | None:
        if self.top is None:
            return None
        p = next(p for p in self.problems if p.id == self.top)
        return p.with_solutions(self.solutions, p.certificate)

    def utility_at(self, x) -> float:
        for p in self.problems:
            if p.feasible.contains(x):
                return p.value(x)
        raise ValueError("point outside the glued domain")

    def gamma(self, x) -> list[np.ndarray]:
        """Closest points of the union to the projection of ``x`` on the carrier."""
        y = project(x, self.carrier)
        cands = [p.feasible.nearest(y) for p in self.problems]
        dists = [np.linalg.norm(c - y) for c in cands]
        best = min(dists)
        out = []
        for c, d in zip(cands, dists):
            if d <= best + MEMBERSHIP_TOL and not any(np.linalg.norm(c - o) <= MEMBERSHIP_TOL for o in out):
                out.append(c)
        out.sort(key=tuple)
        return out


def build_star(problems: Sequence[LocalProblem]) -> StarProblem | Incompatible:
    if not problems:
        raise ValueError("need at least one problem")
    for p in problems:
        p._require_solved()
    for a, b in combinations(problems, 2):
        try:
            a.feasible.intersect(b.feasible)
        except EmptyFeasibleSet:
            continue
        except NotImplementedError:
            pass
        S = intersect_subspaces([a.carrier, b.carrier])
        if not restrictions_agree(a.utility, b.utility, S):
            return Incompatible(
                f"utilities of {a.id!r} and {b.id!r} disagree on their overlap",
                (a.id, b.id),
                _disagreement_point(a.utility, b.utility, a.feasible.section(S)),
            )
    values = [(p.value(x), x) for p in problems for x in p.solutions]
    best = max(v for v, _ in values)
    sols = []
    for v, x in values:
        if v >= best - 1e-9 and not any(np.linalg.norm(x - y) <= MEMBERSHIP_TOL for y in sols):
            sols.append(x)
    sols.sort(key=tuple)
    top = None
    for p in problems:
        if all(p.feasible.contains_set_of(q.feasible) for q in problems):
            top = p.id
            break
    carrier = sum_subspaces([p.carrier for p in problems])
    return StarProblem(tuple(problems), carrier, tuple(sols), best, top)


def in_F(x, s: LocalProblem, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership of ``x`` in the valuation of ``s``: Γ(x) meets the solutions."""
    s._require_solved()
    g = gamma(x, s.feasible)
    return any(np.linalg.norm(a - b) <= tol for a in g for b in s.solutions)


def in_F_star(x, star: StarProblem, tol: float = MEMBERSHIP_TOL) -> bool:
    return any(np.linalg.norm(a - b) <= tol for a in star.gamma(x) for b in star.solutions)


@dataclass
class Report:
    check: str
    verdict: bool
    counterexamples: list
    seed: int
    samples: int
    details: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return self.details.get("violations", len(self.counterexamples))

    def to_dict(self):
        return {
            "check": self.check,
            "verdict": self.verdict,
            "counterexamples": [[float(v) for v in x] for x in self.counterexamples],
            "seed": self.seed,
            "samples": self.samples,
        }


def _sample_points(rng, n_samples, box, domain, problems):
    if domain is not None and box is None:
        return domain.sample(rng, n_samples)
    if box is None:
        los, his = zip(*(p.feasible.bounding_box() for p in problems))
        lo, hi = np.min(los, axis=0), np.max(his, axis=0)
        pad = 0.5 * np.maximum(hi - lo, 1.0)
        box = (lo - pad, hi + pad)
    lo, hi = (np.asarray(b, float) for b in box)
    out = []
    while len(out) < n_samples:
        X = rng.uniform(lo, hi, size=(n_samples, len(lo)))
        for x in X:
            if domain is None or domain.contains(x):
                out.append(x)
                if len(out) == n_samples:
                    break
    return np.array(out).reshape(n_samples, len(lo))


def _targeted_points(problems):
    pts = []
    for p in problems:
        pts.extend(p.solutions or ())
        V = p.feasible.vertices()
        if V is not None:
            pts.extend(V)
    for a, b in combinations(problems, 2):
        try:
            F = a.feasible.intersect(b.feasible)
        except (EmptyFeasibleSet, NotImplementedError):
            continue
        V = F.vertices()
        if V is not None:
            pts.extend(V)
    return pts


def check_presheaf(
    s_k: LocalProblem,
    s_j: LocalProblem,
    samples: int = 10_000,
    box=None,
    domain: FeasibleSet | None = None,
    seed: int = 0,
    targeted: bool = False,
    max_counterexamples: int = 20,
) -> Report:
    """Monte-Carlo check that ``F(s_j) ⊆ F(s_k)``.

    Points are drawn uniformly from ``box``; when ``domain`` is given only
    points inside it are kept (rejection sampling), since Γ is defined on
    the global feasible set.  ``targeted`` adds solutions and vertices.
    """
    rng = np.random.default_rng(seed)
    pts = list(_sample_points(rng, samples, box, domain, [s_k, s_j]))
    if targeted:
        pts.extend(_targeted_points([s_k, s_j]))
    bad = [x for x in pts if in_F(x, s_j) and not in_F(x, s_k)]
    return Report("presheaf", not bad, bad[:max_counterexamples], seed, samples,
                  {"violations": len(bad), "points": len(pts)})


def check_gluing(
    problems: Sequence[LocalProblem],
    samples: int = 10_000,
    box=None,
    domain: FeasibleSet | None = None,
    seed: int = 0,
    targeted: bool = True,
    max_counterexamples: int = 20,
) -> Report:
    """Sample-based equalizer check for the glued problem.

    Verifies ``F(s*) ⊆ ⋂_k F(s^k)`` and that every sampled point lying in
    every ``F(s^k)`` and in every ``F(s^{k∧j})`` lies in ``F(s*)``.
    """
    from .local_solver import solve_local

    star = build_star(problems)
    if isinstance(star, Incompatible):
        raise IncompatibleFamily(star)
    meets = []
    for a, b in combinations(problems, 2):
        try:
            m = meet(a, b)
        except (EmptyFeasibleSet, NotImplementedError):
            continue
        if isinstance(m, Incompatible):
            raise IncompatibleFamily(m)
        meets.append(solve_local(m) if not m.solved else m)
    rng = np.random.default_rng(seed)
    pts = list(_sample_points(rng, samples, box, domain, problems))
    if targeted:
        pts.extend(_targeted_points(problems))
        pts.extend(star.solutions)
    bad = []
    n_star = n_all = 0
    for x in pts:
        in_star = in_F_star(x, star)
        in_all = all(in_F(x, p) for p in problems)
        n_star += in_star
        n_all += in_all
        if in_star and not in_all:
            bad.append(x)
        elif in_all and all(in_F(x, m) for m in meets) and not in_star:
            bad.append(x)
    return Report("gluing", not bad, bad[:max_counterexamples], seed, samples,
                  {"violations": len(bad), "points": len(pts), "in_star": n_star, "in_all": n_all,
                   "star_solutions": [list(map(float, x)) for x in star.solutions]})
