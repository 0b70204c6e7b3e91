"""Walk through the two-axes example end to end.

Two problems on the coordinate axes of R^2 share the utility
U = 3 - x^2 - y^2 + 2y + x.  Each is solved locally, the solutions are glued
into a global point, a piecewise-polynomial surrogate is built over the
four-class arrangement, a diagonal problem is added, and finally the
surrogate is driven to the true maximizer by covering the square.

Run with ``python3 demos/two_axes_pipeline.py``.
"""

import json
from pathlib import Path

from sheafopt.concave import glue
from sheafopt.local_solver import solve_local
from sheafopt.serialize import load_problem_file
from sheafopt.surrogate import build_surrogate, convergence_run, evolve

DATA = Path(__file__).resolve().parent / "data"


def load(name):
    return load_problem_file(json.loads((DATA / name).read_text()))


def main():
    doc = load("two_axes.json")
    probs = [solve_local(p) for p in doc["problems"]]
    for p in probs:
        print(f"{p.id:8s} solutions {[list(map(float, s)) for s in p.solutions]}")

    res = glue(probs, doc["true_utility"])
    print(f"glued point {list(map(float, res.point))} ({res.status}, residual {res.residual:.1e})")

    state = build_surrogate(probs)
    print(f"\nsurrogate: lambda={state.lam} classes, tau={state.tau} rows, degree {state.degree}, "
          f"{len(state.kernel)} kernel generators")
    for c in state.partition.classes:
        print(f"  class {c.name():6s} {c.kind:12s} dim {c.dim}")
    for x, v in zip(state.maximal.points, state.maximal.values):
        print(f"  maximal element {list(map(float, x))} V={v:.4f}")

    diag = [solve_local(p) for p in load("diagonal_line.json")["problems"]][0]
    new, rep = evolve(state, diag)
    print(f"\nadd '{diag.id}': lambda {state.lam} -> {new.lam}, tau {state.tau} -> {new.tau}, "
          f"degree {rep.degree_before} -> {rep.degree_after}")
    print(f"  stability: max |V_new - V_old| = {rep.stability_max_diff:.1e} over {rep.stability_points} points")

    sc = load("two_axes_scenario.json")
    run = convergence_run(sc["true_utility"], sc["sequence"], sc["region"], seed=0)
    print(f"\nconvergence toward x_hat = {list(map(float, run.x_hat))}")
    print(run.to_csv(), end="")


if __name__ == "__main__":
    main()
