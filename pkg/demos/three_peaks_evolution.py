"""Three tied maxima and the degree step.

The utility U = -|x-a|^2 |x|^2 |x+a|^2 with a = (1, 1, 0) has three global
maxima on the line spanned by a.  A plane containing that line already sees
all three; adding a second plane through the same line forces the
intersection class to carry three maxima, so the surrogate degree moves
from 2 to 3 while V stays unchanged away from the new carrier.

Run with ``python3 demos/three_peaks_evolution.py``.
"""

from sheafopt.category import LocalProblem
from sheafopt.local_solver import solve_local
from sheafopt.polynomial import SparsePoly, squared_distance_poly
from sheafopt.space import FeasibleSet, Subspace
from sheafopt.surrogate import build_surrogate, count_maxima, evolve


def main():
    U = SparsePoly.constant(-1, 3)
    for c in ([-1, -1, 0], [0, 0, 0], [1, 1, 0]):
        U = U * squared_distance_poly(c)
    xy = solve_local(LocalProblem("xy", FeasibleSet.box(Subspace([[1, 0, 0], [0, 1, 0]]),
                                                        [-1.5, -1.5], [1.5, 1.5]), U))
    dz = solve_local(LocalProblem("diag-z", FeasibleSet.box(Subspace([[1, 1, 0], [0, 0, 1]]),
                                                            [-2, -1], [2, 1]), U))
    for p in (xy, dz):
        print(f"{p.id:7s} maxima {[[round(float(v), 6) for v in s] for s in p.solutions]}")

    old = build_surrogate([xy])
    print(f"\none plane: degree {old.degree}, classes {old.lam}, maxima per class "
          f"{count_maxima([xy], old.partition)}")
    new, rep = evolve(old, dz)
    print(f"two planes: degree {new.degree}, classes {new.lam}, maxima per class "
          f"{count_maxima([xy, dz], new.partition)}")
    print(f"degree step {rep.degree_before} -> {rep.degree_after} ok={rep.degree_step_ok}")
    print(f"stability off the new plane: {rep.stability_max_diff:.1e} over {rep.stability_points} points")
    # one maximal element is reported per class, so ties inside a class collapse
    print(f"V at the three maxima: {[float(new.V(c)) for c in ([-1, -1, 0], [0, 0, 0], [1, 1, 0])]}")


if __name__ == "__main__":
    main()
