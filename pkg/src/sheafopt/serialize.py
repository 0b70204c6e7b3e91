"""Canonical JSON and the problem-file schema.

Canonical form: sorted keys, floats written with ``%.17g`` (so they
round-trip bit-exactly), rationals as ``"num/den"`` strings.  Dumping a
loaded snapshot reproduces the original bytes.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np

from . import _exact
from .category import LocalProblem
from .polynomial import SparsePoly
from .space import Ball, Box, FeasibleSet, Polytope, Subspace


class SchemaError(ValueError):
    """Malformed input; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"non-finite float {v!r} cannot be serialized")
    s = "%.17g" % v
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, out: list):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, Fraction):
        out.append(json.dumps(f"{obj.numerator}/{obj.denominator}"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _encode(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    out: list = []
    _encode(obj, out)
    return "".join(out) + "\n"


def frac_str(v) -> str:
    v = _exact.to_fraction(v)
    return f"{v.numerator}/{v.denominator}"


# --------------------------------------------------------------- problems


def feasible_to_dict(F: FeasibleSet) -> dict:
    s = F.shape
    if isinstance(s, Box):
        d = {"type": "box", "lower": list(map(float, s.lower)), "upper": list(map(float, s.upper))}
    elif isinstance(s, Polytope):
        d = {"type": "polytope", "A": np.asarray(s.A, float).tolist(), "b": list(map(float, s.b))}
    else:
        d = {"type": "ball", "center": list(map(float, s.center)), "radius": float(s.radius)}
    return d


def _num_list(v, path, length=None):
    if not isinstance(v, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        raise SchemaError(path, "expected a list of numbers")
    if length is not None and len(v) != length:
        raise SchemaError(path, f"expected {length} entries, got {len(v)}")
    return [float(a) for a in v]


def feasible_from_dict(d, carrier: Subspace, path: str) -> FeasibleSet:
    if not isinstance(d, dict) or "type" not in d:
        raise SchemaError(path, "expected an object with a 'type' field")
    k = carrier.dim
    t = d["type"]
    try:
        if t == "box":
            return FeasibleSet.box(carrier, _num_list(d.get("lower"), path + ".lower", k),
                                   _num_list(d.get("upper"), path + ".upper", k))
        if t == "polytope":
            A = d.get("A")
            if not isinstance(A, list):
                raise SchemaError(path + ".A", "expected a matrix")
            rows = [_num_list(r, f"{path}.A[{i}]", k) for i, r in enumerate(A)]
            b = _num_list(d.get("b"), path + ".b", len(rows))
            return FeasibleSet.polytope(carrier, np.array(rows, float).reshape(len(rows), k), b)
        if t == "ball":
            r = d.get("radius")
            if not isinstance(r, (int, float)):
                raise SchemaError(path + ".radius", "expected a number")
            return FeasibleSet.ball(carrier, _num_list(d.get("center"), path + ".center", k), float(r))
    except SchemaError:
        raise
    except ValueError as e:
        raise type(e)(f"{path}: {e}") from e
    raise SchemaError(path + ".type", f"unknown feasible set type {t!r}")


def subspace_from_list(basis, n: int, path: str) -> Subspace:
    if not isinstance(basis, list):
        raise SchemaError(path, "expected a list of vectors")
    try:
        gens = [[_exact.to_fraction(v) for v in g] for g in basis]
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise SchemaError(path, f"bad vector entry ({e})") from e
    for i, g in enumerate(gens):
        if len(g) != n:
            raise SchemaError(f"{path}[{i}]", f"expected {n} coordinates")
    try:
        return Subspace(gens, ambient_dim=n)
    except ValueError as e:
        raise SchemaError(path, str(e)) from e


def poly_from_json(data, n: int, path: str) -> SparsePoly:
    if not isinstance(data, list):
        raise SchemaError(path, "expected a list of terms")
    for i, t in enumerate(data):
        if not isinstance(t, dict) or "exponents" not in t or "coeff" not in t:
            raise SchemaError(f"{path}[{i}]", "term needs 'exponents' and 'coeff'")
        if len(t["exponents"]) != n:
            raise SchemaError(f"{path}[{i}].exponents", f"expected {n} exponents")
    try:
        return SparsePoly.from_json(data, n)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise SchemaError(path, str(e)) from e


def problem_to_dict(p: LocalProblem, with_solutions: bool = True) -> dict:
    d = {
        "id": p.id,
        "basis": [[frac_str(v) for v in g] for g in p.carrier.gens],
        "feasible": feasible_to_dict(p.feasible),
        "utility": p.utility.to_json(),
    }
    if with_solutions and p.solved:
        d["solutions"] = [list(map(float, x)) for x in p.solutions]
        if p.certificate is not None:
            d["certificate"] = p.certificate.to_dict()
    return d


def problem_from_dict(d, n: int, path: str, default_utility: SparsePoly | None = None) -> LocalProblem:
    from .local_solver import Certificate

    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    pid = str(d.get("id", path))
    S = subspace_from_list(d.get("basis"), n, path + ".basis")
    F = feasible_from_dict(d.get("feasible"), S, path + ".feasible")
    if "utility" in d:
        u = poly_from_json(d["utility"], n, path + ".utility")
    elif default_utility is not None:
        u = default_utility
    else:
        raise SchemaError(path + ".utility", "missing")
    sols, cert = None, None
    if "solutions" in d:
        sols = [np.array(_num_list(x, f"{path}.solutions[{i}]", n)) for i, x in enumerate(d["solutions"])]
        if "certificate" in d:
            c = d["certificate"]
            cert = Certificate(c["method"], float(c["value"]), float(c["residual"]), bool(c["degenerate"]))
    return LocalProblem(pid, F, u, tuple(sols) if sols is not None else None, cert)


def load_problem_file(data) -> dict:
    """Validate a parsed problem or scenario file.

    Returns ``{"ambient_dim", "problems", "region", "true_utility", "sequence"}``
    with missing optional entries set to None.
    """
    if not isinstance(data, dict):
        raise SchemaError("$", "expected a JSON object")
    n = data.get("ambient_dim")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("$.ambient_dim", "expected a positive integer")
    U = poly_from_json(data["true_utility"], n, "$.true_utility") if "true_utility" in data else None
    out = {"ambient_dim": n, "true_utility": U, "region": None, "problems": [], "sequence": None}
    probs = data.get("problems", [])
    if not isinstance(probs, list):
        raise SchemaError("$.problems", "expected a list")
    out["problems"] = [problem_from_dict(p, n, f"$.problems[{i}]", U) for i, p in enumerate(probs)]
    if "sequence" in data:
        seq = data["sequence"]
        if not isinstance(seq, list):
            raise SchemaError("$.sequence", "expected a list")
        out["sequence"] = [problem_from_dict(p, n, f"$.sequence[{i}]", U) for i, p in enumerate(seq)]
    if data.get("region") is not None:
        out["region"] = feasible_from_dict(data["region"], Subspace.full(n), "$.region")
    return out
