"""Command line front end.

    sheafopt solve FILE
    sheafopt glue FILE
    sheafopt surrogate FILE [--degree R] [--samples N] [--seed S] [--grid-csv PATH]
    sheafopt evolve STATE NEW_PROBLEMS
    sheafopt converge SCENARIO
    sheafopt groebner FILE

Every command writes canonical JSON (CSV for ``converge``) to ``--out`` or
stdout.  Exit codes: 0 success (including soft flags), 2 invalid input,
3 mathematical incompatibility, 4 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import groebner as gb
from .arrangement import build_incidence, build_partition
from .category import IncompatibleFamily
from .concave import glue
from .local_solver import is_strictly_concave, solve_local
from .serialize import SchemaError, dumps, load_problem_file
from .space import EmptyFeasibleSet, FeasibleSet, Subspace, UnboundedFeasibleSet
from .surrogate import (
    ContinuityConflict,
    DegreeCapExceeded,
    DegreeInfeasible,
    SurrogateState,
    build_surrogate,
    convergence_run,
    evolve,
)

EXIT_OK, EXIT_INVALID, EXIT_INCOMPATIBLE, EXIT_CAP = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}", EXIT_INVALID) from e
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}", EXIT_INVALID) from e


def _load(path):
    return load_problem_file(_read_json(path))


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    doc = _load(args.file)
    report = []
    for p in doc["problems"]:
        s = solve_local(p)
        report.append({"id": s.id, "solutions": [list(map(float, x)) for x in s.solutions],
                       "certificate": s.certificate.to_dict()})
    _emit(dumps({"problems": report}), args.out)
    return EXIT_OK


def cmd_glue(args) -> int:
    doc = _load(args.file)
    probs = [solve_local(p) for p in doc["problems"]]
    if not probs:
        raise CliError("glue needs at least one problem", EXIT_INVALID)
    concave = {p.id: bool(is_strictly_concave(p.utility, p.carrier)) for p in probs}
    res = glue(probs, doc["true_utility"])
    out = res.to_dict(probs)
    out["concave"] = concave
    out["affine_directions"] = [list(map(float, v)) for v in res.affine.directions.basis.T]
    _emit(dumps(out), args.out)
    return EXIT_OK


def _grid_csv(state: SurrogateState, per_axis: int) -> str:
    lo, hi = state.region.bounding_box()
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(pts.shape[1])] + ["V"])
    for x in pts:
        w.writerow(["%.17g" % v for v in x] + ["%.17g" % state.V(x)])
    return buf.getvalue()


def cmd_surrogate(args) -> int:
    doc = _load(args.file)
    if not doc["problems"]:
        raise CliError("surrogate needs at least one problem", EXIT_INVALID)
    state = build_surrogate(doc["problems"], doc["region"], degree=args.degree,
                            samples=args.samples, seed=args.seed)
    _emit(dumps(state.to_dict()), args.out)
    if args.grid_csv:
        with open(args.grid_csv, "w") as fh:
            fh.write(_grid_csv(state, 41 if state.V.nvars <= 2 else 11))
    return EXIT_OK


def cmd_evolve(args) -> int:
    try:
        state = SurrogateState.from_dict(_read_json(args.state))
    except SchemaError as e:
        raise CliError(f"{args.state}: {e}", EXIT_INVALID) from e
    doc = _load(args.new)
    reports = []
    for p in doc["problems"]:
        state, rep = evolve(state, p, samples=args.samples, seed=args.seed)
        reports.append(rep.to_dict())
    if reports and not reports[-1]["unchanged"]:
        state.info["evolution"] = reports
    _emit(dumps(state.to_dict()), args.out)
    for r in reports:
        sys.stderr.write(f"evolve: verdict {r['verdict']} (degree {r['degree_before']} -> "
                         f"{r['degree_after']}, stability diff {r['stability_max_diff']:.3g})\n")
    return EXIT_OK


def cmd_converge(args) -> int:
    doc = _load(args.file)
    U = doc["true_utility"]
    if U is None:
        raise CliError("$.true_utility: missing", EXIT_INVALID)
    seq = doc["sequence"] if doc["sequence"] is not None else doc["problems"]
    region = doc["region"]
    if region is None:
        raise CliError("$.region: missing", EXIT_INVALID)
    rep = convergence_run(U, seq, region, budget=args.budget, samples=args.samples, seed=args.seed)
    _emit(rep.to_csv(), args.out)
    if rep.plateau:
        sys.stderr.write("converge: distance never reached 1e-6 (plateau)\n")
    if rep.m_hat is None:
        sys.stderr.write("converge: no problem covers the maximizer within the budget\n")
    return EXIT_OK


def cmd_groebner(args) -> int:
    data = _read_json(args.file)
    if isinstance(data, dict) and "generators" in data:
        try:
            nvars, rank = int(data["nvars"]), int(data["rank"])
            order = gb.ModuleOrder(data.get("base", "grevlex"), data.get("order", "pot"))
            gens = [gb.ModuleElement.from_json(g, rank, nvars) for g in data["generators"]]
        except (KeyError, TypeError, ValueError) as e:
            raise CliError(f"{args.file}: {e}", EXIT_INVALID) from e
        G = gb.buchberger(gens, order)
        out = {"rank": rank, "nvars": nvars, "order": order.position, "basis": [g.to_json() for g in G],
               "is_groebner": gb.is_groebner(G, order)}
    else:
        doc = load_problem_file(data)
        subs = []
        for p in doc["problems"]:
            if not any(p.carrier.equals(S) for S in subs):
                subs.append(p.carrier)
        P = build_partition(subs)
        T = build_incidence(P)
        rows = gb.t_action(P, T)
        n = doc["ambient_dim"]
        if P.size > gb.DESK_CAPS["positions"] or n > gb.DESK_CAPS["nvars"]:
            raise gb.ResourceCapExceeded(f"arrangement with {P.size} classes in R^{n} exceeds {gb.DESK_CAPS}")
        G = gb.kernel_generators(rows, P.size, n)
        out = {"rank": P.size, "nvars": n, "order": "top", "classes": [c.name() for c in P.classes],
               "generators": [g.to_json() for g in G],
               "kernel_check": all(gb.kernel_check(g, rows) for g in G)}
    _emit(dumps(out), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sheafopt", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, samples=True):
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        if samples:
            p.add_argument("--samples", type=int, default=2000)
        return p

    common(sub.add_parser("solve", help="solve every local problem"), False).add_argument("file")
    common(sub.add_parser("glue", help="glue concave local solutions"), False).add_argument("file")
    p = common(sub.add_parser("surrogate", help="build the piecewise surrogate"))
    p.add_argument("file")
    p.add_argument("--degree", type=int)
    p.add_argument("--grid-csv", help="also write V on a grid as CSV")
    p = common(sub.add_parser("evolve", help="add problems to a snapshot"))
    p.add_argument("state")
    p.add_argument("new")
    p = common(sub.add_parser("converge", help="convergence table for a scenario"))
    p.add_argument("file")
    p.add_argument("--budget", type=int)
    common(sub.add_parser("groebner", help="module Gröbner basis or kernel generators"), False).add_argument("file")
    return ap


COMMANDS = {
    "solve": cmd_solve,
    "glue": cmd_glue,
    "surrogate": cmd_surrogate,
    "evolve": cmd_evolve,
    "converge": cmd_converge,
    "groebner": cmd_groebner,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as e:
        msg, code = str(e), e.code
    except (SchemaError, EmptyFeasibleSet, UnboundedFeasibleSet) as e:
        msg, code = str(e), EXIT_INVALID
    except IncompatibleFamily as e:
        msg, code = f"incompatible family: {e}", EXIT_INCOMPATIBLE
    except (ContinuityConflict, DegreeInfeasible) as e:
        msg, code = str(e), EXIT_INCOMPATIBLE
    except (gb.ResourceCapExceeded, DegreeCapExceeded) as e:
        msg, code = f"resource cap: {e}", EXIT_CAP
    except ValueError as e:
        msg, code = str(e), EXIT_INVALID
    sys.stderr.write(f"sheafopt {args.command}: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
