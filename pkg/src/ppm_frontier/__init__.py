"""Efficiency/robustness frontiers for robust linear programs with ellipsoidal uncertainty."""
from .domains import (BoxSimplex, Polyhedron, ScaledSimplex, Simplex, min_quadratic_over_domain,
                      project_domain, project_simplex, solve_linear_plus_quadratic)
from .errors import *  # noqa: F401,F403
from .frontier import (EllipsoidalSet, FrontierPoint, FrontierSet, evaluate_point,
                       solve_pareto_exact, solve_pe_epsilon_constraint, sweep_exact_frontier,
                       worst_case_perturbation, worst_case_value)
from .linalg import SpdMatrix, cholesky_factor, quad_form, solve_spd
from .ppm import (PpmConfig, Trajectory, alpha_of_omega, central_path_point,
                  iter_ppm_trajectory, most_robust_start, omega_schedule, ppm_step,
                  run_ppm_trajectory)

__version__ = "0.1.0"
