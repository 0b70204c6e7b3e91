"""Global optimum from local optima when the utility is concave.

Each local solution ``x̂^k`` on ``L^k`` pins the projection of the global
point onto ``L^k``; the candidate is the intersection of the affine
preimages ``{x : project(x, L^k) = x̂^k}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .category import LocalProblem, restrictions_agree
from .polynomial import SparsePoly
from .space import FEAS_TOL, AffineSet, Subspace, intersect_affine, project


@dataclass(frozen=True)
class GlueInput:
    problems: tuple
    dims: tuple
    ambient_dim: int

    @classmethod
    def from_problems(cls, problems: Sequence[LocalProblem]) -> GlueInput:
        if not problems:
            raise ValueError("need at least one problem")
        n = problems[0].feasible.ambient_dim
        for p in problems:
            p._require_solved()
            if len(p.solutions) != 1:
                raise ValueError(f"problem {p.id!r} has {len(p.solutions)} solutions; gluing needs exactly one")
            if p.feasible.ambient_dim != n:
                raise ValueError("problems live in different ambient spaces")
        return cls(tuple(problems), tuple(p.carrier.dim for p in problems), n)

    @property
    def solutions(self) -> list[np.ndarray]:
        return [p.solutions[0] for p in self.problems]


@dataclass(frozen=True)
class GlueResult:
    point: np.ndarray
    residual: float
    status: str
    affine: AffineSet
    solutions_span: bool
    constraints_full_rank: bool
    dims_sum: int
    restriction_hypothesis: bool | None = None

    @property
    def informative_by(self) -> str | None:
        if self.solutions_span:
            return "solutions-span"
        if self.constraints_full_rank:
            return "constraint-rank"
        return None

    def to_dict(self, problems=None):
        out = {
            "point": [float(v) for v in self.point],
            "residual": self.residual,
            "status": self.status,
            "affine_dim": self.affine.dim,
            "informative_by": self.informative_by,
            "dims_sum": self.dims_sum,
        }
        if problems is not None:
            out["per_k_distances"] = glue_quality(self.point, problems)
        return out


def preimage(problem: LocalProblem) -> AffineSet:
    """``{x : project(x, L^k) = x̂^k}``."""
    return AffineSet(problem.solutions[0], problem.carrier.complement())


def glue(problems: Sequence[LocalProblem] | GlueInput, utility: SparsePoly | None = None,
         tol: float = FEAS_TOL) -> GlueResult:
    """Intersect the affine preimages of the local solutions.

    ``status`` is one of ``exact_point``, ``overdetermined_consistent``,
    ``underdetermined`` or ``inconsistent``.  For inconsistent systems the
    least-squares point is returned.  If ``utility`` is given, the result
    records whether every local utility is its restriction.
    """
    gi = problems if isinstance(problems, GlueInput) else GlueInput.from_problems(problems)
    n = gi.ambient_dim
    inter = intersect_affine([preimage(p) for p in gi.problems], tol)
    sols = np.array(gi.solutions)
    solutions_span = bool(np.linalg.matrix_rank(sols, tol=1e-10) == n)
    full_rank = inter.rank == n
    dims_sum = sum(gi.dims)
    if inter.empty:
        status = "inconsistent"
    elif not full_rank:
        status = "underdetermined"
    elif dims_sum == n:
        status = "exact_point"
    else:
        status = "overdetermined_consistent"
    hyp = None
    if utility is not None:
        hyp = all(restrictions_agree(utility, p.utility, p.carrier) for p in gi.problems)
    return GlueResult(inter.affine.point, inter.residual, status, inter.affine,
                      solutions_span, full_rank, dims_sum, hyp)


def glue_quality(x, problems: Sequence[LocalProblem]) -> list[float]:
    """``|project(x, L^k) - x̂^k|`` for each problem."""
    return [float(np.linalg.norm(project(x, p.carrier) - p.solutions[0])) for p in problems]


def check_separability(U: SparsePoly, S: Subspace, tol: float = 1e-10) -> bool:
    """Whether ``U`` splits as a sum of a function on ``S`` and one on ``S⊥``.

    ``U`` is rewritten in coordinates ``(t, s)`` adapted to ``S ⊕ S⊥``; it is
    separable iff no monomial involves both ``t`` and ``s``.  Any basis of
    each block will do, so the exact spanning vectors are used and the test
    is exact for exact polynomials.
    """
    if U.nvars != S.ambient_dim:
        raise ValueError("dimension mismatch")
    d = S.dim
    if d in (0, U.nvars):
        return True
    comp = S.complement()
    if U.exact:
        cols = list(S.gens) + list(comp.gens)
        Q = [[cols[j][i] for j in range(len(cols))] for i in range(U.nvars)]
        V = U.compose_linear(Q)
    else:
        Q = np.hstack([S.basis, comp.basis])
        V = U.compose_linear(Q)
    for m, c in V.terms.items():
        if any(m[:d]) and any(m[d:]):
            if V.exact or abs(c) > tol:
                return False
    return True
