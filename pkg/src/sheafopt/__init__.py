"""Reconstruct global optima from local optimization problems on subspaces.

Concave utilities are handled by intersecting the affine preimages of the
local solutions.  The general case builds a continuous piecewise-polynomial
surrogate over the arrangement of the subspaces and refines it as new local
problems arrive.
"""

from .arrangement import IncidenceMatrix, Partition, build_incidence, build_partition, class_of
from .category import (
    IncompatibleFamily,
    LocalProblem,
    build_star,
    check_gluing,
    check_morphism,
    check_presheaf,
    in_F,
    meet,
)
from .concave import check_separability, glue, glue_quality
from .local_solver import is_strictly_concave, solve_local
from .polynomial import SparsePoly, poly_equal, restrict
from .space import (
    AffineSet,
    FeasibleSet,
    Subspace,
    gamma,
    intersect_affine,
    intersect_subspaces,
    project,
)
from .surrogate import (
    PiecewiseFn,
    SurrogateState,
    assemble_V,
    build_surrogate,
    canonical_pieces,
    choose_degree,
    continuity_system,
    convergence_run,
    evolve,
    fit_alpha,
    kernel_basis,
    maximize_V,
)

__version__ = "0.1.0"
