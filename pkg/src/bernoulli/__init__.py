"""Interior Bernoulli free boundary problems for the p-Laplacian in the plane."""
from .errors import *  # noqa: F401,F403
from .geometry import (
    BoundaryConstraint, ConvexBody, Direction, body_from_support, boundary_point, disk, ellipse,
    harmonic_mean_constraint, hausdorff_distance, hull_of_union, minkowski_combine, polygon_body,
    support_fourier,
)
from .oracles import (
    RadialCase, annulus_boundary_gradient, annulus_potential, bernoulli_constant_ball,
    bernoulli_radii, c_N,
)
from .pde import (
    RingMesh, PotentialField, boundary_gradient, build_mesh, check_discrete_psubharmonic,
    solve_p_capacitary,
)
from .freeboundary import (
    CONVERGED, MAX_ITERATIONS, NO_SOLUTION, SolveReport, SolverConfig, bernoulli_constant_numeric,
    check_subsolution, solve_interior_bernoulli, update_boundary,
)
from .envelope import (
    GridFunction, check_combination_inclusion, harmonic_gradient, hull_gradient_bound,
    maxmin_representation, minkowski_combine_potentials, quasiconcave_envelope,
)

__version__ = "0.1.0"
