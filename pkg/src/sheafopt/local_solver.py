"""Maximization of a polynomial utility over a compact feasible set.

Quadratic (and affine) objectives on boxes and polytopes are solved by
enumerating every face and solving its KKT system, which is exact up to
floating point.  Everything else goes through a dense grid followed by a
local SLSQP polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from . import _exact
from .polynomial import SparsePoly, restrict
from .space import FEAS_TOL, FeasibleSet, Subspace

VALUE_TOL = 1e-6
DISTINCT_TOL = 1e-4
MAX_GRID_POINTS = 200_000


@dataclass(frozen=True)
class Certificate:
    method: str
    value: float
    residual: float
    degenerate: bool = False

    def to_dict(self):
        return {"method": self.method, "value": self.value, "residual": self.residual,
                "degenerate": self.degenerate}


@dataclass(frozen=True)
class LocalMaxima:
    """Maximizers in carrier coordinates plus their certificate."""

    points: list
    certificate: Certificate


def _quadratic_parts(q: SparsePoly):
    d = q.nvars
    qf = q.to_float()
    c = qf.coeff((0,) * d)
    g = np.array([qf.coeff(tuple(int(i == j) for j in range(d))) for i in range(d)])
    H = np.zeros((d, d))
    for m, v in qf.terms.items():
        if sum(m) == 2:
            idx = [i for i, e in enumerate(m) for _ in range(e)]
            i, j = idx
            if i == j:
                H[i, i] = 2 * v
            else:
                H[i, j] = H[j, i] = v
    return c, g, H


def _dedupe(points, values, best, vtol=VALUE_TOL, dtol=DISTINCT_TOL):
    order = sorted(range(len(points)), key=lambda i: (-values[i], tuple(points[i])))
    kept = []
    for i in order:
        if values[i] < best - vtol:
            continue
        if all(np.linalg.norm(points[i] - points[j]) > dtol for j in kept):
            kept.append(i)
    out = [points[i] for i in kept]
    out.sort(key=tuple)
    return out


def _projected_gradient_residual(q: SparsePoly, shape, t) -> float:
    if q.nvars == 0:
        return 0.0
    grad = np.array([gi.eval(t) for gi in q.to_float().gradient()], dtype=float)
    return float(np.linalg.norm(t - shape.nearest(t + grad)))


def maximize_quadratic_polyhedral(q: SparsePoly, A, b):
    """All maximizers of a degree <= 2 polynomial over ``{A t <= b}``.

    Returns ``(points, value)``.  Each face is visited through its active
    set; the stationary point of ``q`` on the face's affine hull is kept when
    it is feasible.  The global maximum is attained at one of these points.
    """
    d = q.nvars
    c, g, H = _quadratic_parts(q)
    if d == 0:
        return [np.zeros(0)], float(c)
    cands, vals = [], []
    m = A.shape[0]
    for k in range(0, min(d, m) + 1):
        for rows in combinations(range(m), k):
            M = A[list(rows)].reshape(k, d)
            K = np.block([[H, -M.T], [M, np.zeros((k, k))]])
            rhs = np.concatenate([-g, b[list(rows)]])
            try:
                if np.linalg.cond(K) > 1e12:
                    continue
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            t = sol[:d]
            if np.all(A @ t <= b + FEAS_TOL):
                cands.append(t)
                vals.append(float(c + g @ t + 0.5 * t @ H @ t))
    if not cands:
        raise RuntimeError("no feasible KKT point found")
    best = max(vals)
    return _dedupe(cands, vals, best), best


def _grid(shape, step):
    lo, hi = shape.bounds()
    d = len(lo)
    counts = np.maximum(1, np.ceil((hi - lo) / step).astype(int) + 1)
    while np.prod(counts.astype(float)) > MAX_GRID_POINTS:
        step *= 1.25
        counts = np.maximum(1, np.ceil((hi - lo) / step).astype(int) + 1)
    axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1) if d else np.zeros((1, 0))
    if shape.kind == "ball":
        mask = np.linalg.norm(pts - shape.center, axis=1) <= shape.radius + FEAS_TOL
    else:
        A, b = shape.halfspaces()
        mask = np.all(pts @ A.T <= b + FEAS_TOL, axis=1)
    pts = pts[mask]
    if shape.kind == "ball":
        pts = np.vstack([pts, shape.center[None, :]])
    return pts, step


def _newton_refine(qf, grad, hess, t, shape, iters: int = 20):
    """Newton steps on the gradient at an interior nondegenerate maximum.

    SLSQP stops at about sqrt(eps) in the argument; a few Newton steps get
    the stationary point to rounding level.  Boundary points and points
    with a non negative definite Hessian are returned unchanged.
    """
    t = np.asarray(t, float)
    v = qf.eval(t)
    for _ in range(iters):
        g = np.array([gi.eval(t) for gi in grad], dtype=float)
        H = np.array([[h.eval(t) for h in row] for row in hess], dtype=float)
        if np.any(np.linalg.eigvalsh(H) >= 0):
            break
        dt = np.linalg.solve(H, g)
        nt = t - dt
        if not shape.contains(nt, 0.0) or np.linalg.norm(dt) > 1e-3:
            break
        nv = qf.eval(nt)
        if nv < v - 1e-14 * max(1.0, abs(v)):
            break
        t, v = nt, nv
        if np.linalg.norm(dt) <= 1e-15 * max(1.0, np.linalg.norm(t)):
            break
    return t


def maximize_grid_polish(q: SparsePoly, shape, step: float = 1e-2, n_seeds: int = 12):
    """Dense grid search followed by SLSQP polish of the best grid points."""
    d = q.nvars
    qf = q.to_float()
    pts, step = _grid(shape, step)
    if len(pts) == 0:
        raise RuntimeError("grid has no feasible point")
    vals = qf.eval_many(pts)
    order = np.argsort(-vals)
    seeds = []
    for i in order:
        if all(np.linalg.norm(pts[i] - s) > 5 * step for s in seeds):
            seeds.append(pts[i])
        if len(seeds) >= n_seeds:
            break
    grad = qf.gradient()

    def fun(t):
        return -qf.eval(t)

    def jac(t):
        return -np.array([gi.eval(t) for gi in grad], dtype=float)

    if shape.kind == "ball":
        cons = [{"type": "ineq",
                 "fun": lambda t: shape.radius**2 - np.sum((t - shape.center) ** 2),
                 "jac": lambda t: -2 * (t - shape.center)}]
    else:
        A, b = shape.halfspaces()
        cons = [{"type": "ineq", "fun": lambda t: b - A @ t, "jac": lambda t: -A}]
    hess = qf.hessian()
    cands, cvals = [], []
    for s in seeds:
        res = minimize(fun, s, jac=jac, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        t = shape.nearest(res.x) if res.success else s
        t = _newton_refine(qf, grad, hess, t, shape)
        for cand in (t, s):
            cands.append(np.asarray(cand, float))
            cvals.append(float(qf.eval(cand)))
    best = max(cvals)
    return _dedupe(cands, cvals, best), best


def maximize_on_shape(q: SparsePoly, shape, step: float = 1e-2) -> LocalMaxima:
    """Maximize a polynomial in carrier coordinates over a shape."""
    deg = q.degree()
    if deg <= 0:
        lo, hi = shape.bounds()
        rep = shape.nearest((lo + hi) / 2) if len(lo) else np.zeros(0)
        val = float(q.to_float().eval(rep)) if q.terms else 0.0
        return LocalMaxima([rep], Certificate("degenerate", val, 0.0, degenerate=True))
    if deg <= 2 and shape.kind != "ball":
        A, b = shape.halfspaces()
        pts, val = maximize_quadratic_polyhedral(q, A, b)
        method = "kkt-faces"
    else:
        pts, val = maximize_grid_polish(q, shape, step)
        method = "grid-polish"
    residual = max(_projected_gradient_residual(q, shape, t) for t in pts)
    return LocalMaxima(pts, Certificate(method, val, residual))


def solve_local(problem, step: float = 1e-2):
    """Solve a :class:`~sheafopt.category.LocalProblem`.

    Returns a copy of the problem with ``solutions`` (ambient points) and
    ``certificate`` filled in.
    """
    F: FeasibleSet = problem.feasible
    q = restrict(problem.utility, F.carrier)
    res = maximize_on_shape(q, F.shape, step)
    points = [F.ambient(t) for t in res.points]
    points.sort(key=tuple)
    return problem.with_solutions(points, res.certificate)


def is_strictly_concave(p: SparsePoly, S: Subspace, with_method: bool = False, seed: int = 0):
    """Negative definiteness of the Hessian of ``p`` restricted to ``S``.

    Degree <= 2 restrictions are decided exactly from the leading principal
    minors (rational arithmetic when the restriction is exact).  Higher
    degrees are checked numerically on 100 sampled points.
    """
    q = restrict(p, S)
    d = q.nvars

    def out(v, m):
        return (v, m) if with_method else v

    if d == 0:
        return out(True, "exact")
    if q.degree() <= 1:
        return out(False, "exact")
    if q.degree() == 2:
        H = [[q.diff(i).diff(j).coeff((0,) * d) for j in range(d)] for i in range(d)]
        if q.exact:
            negH = [[-v for v in row] for row in H]
            ok = all(_exact.det([r[:k] for r in negH[:k]]) > 0 for k in range(1, d + 1))
            return out(ok, "exact")
        ev = np.linalg.eigvalsh(np.array(H, dtype=float))
        return out(bool(np.all(ev < -1e-12)), "exact-float")
    rng = np.random.default_rng(seed)
    hess = q.to_float().hessian()
    for _ in range(100):
        t = rng.uniform(-1, 1, d)
        Hm = np.array([[h.eval(t) for h in row] for row in hess])
        if np.any(np.linalg.eigvalsh(Hm) >= 0):
            return out(False, "numerical")
    return out(True, "numerical")
