"""Numerical laboratory for lattice parabolic equations with random
space-time coefficients and their homogenization."""

from .errors import ConfigError, IntegrityError, SolverError, UnsupportedVariantError
from .lattice import (
    EllipticityPair,
    PeriodicCube,
    heat_kernel,
    heat_kernel_1d,
    heat_kernel_solver,
    heat_kernel_table,
    hom_gaussian_kernel,
)
from .parabolic import (
    CoefficientField,
    GreensTable,
    PerturbationSeries,
    aronson_constant,
    aronson_fit,
    aronson_gradient_exponent,
    constant_coefficients,
    damped_perturbation_terms,
    damped_resolvent,
    duhamel_solve,
    greens_backward,
    greens_backward_matrix,
    greens_perturbation_terms,
    max_stable_dt,
    periodic_greens,
    solve_forward,
    spacetime_norm,
)
from .environments import (
    CoefficientMap,
    FieldTrajectory,
    PotentialSpec,
    coefficient_field,
    dump_trajectory,
    gaussian_field_sample,
    langevin_simulate,
    load_trajectory,
    poincare_fourier_check,
)
from .homogenize import (
    CorrectorField,
    QMatrix,
    RateReport,
    a_hom_extract,
    avg_greens_mc,
    corrector_solve,
    e_vector,
    greens_hat_formula,
    greens_hat_quadrature,
    neumann_series_q,
    q_matrix,
    rate_fit,
    t_operator_apply,
)
from .field_theory import (
    TerminalFunctional,
    correlation_identity_check,
    hom_elliptic_greens,
    malliavin_fd_check,
    massive_greens_integral,
    massive_lattice_greens,
    poincare_variance_check,
    thm13_decay_check,
)
from .convex_diffusion import (
    ConvexPotential,
    PathSample,
    convex_diffusion_simulate,
    cosine_perturbed_potential,
    exact_gaussian_path,
    feynman_kac_estimate,
    path_action_hessian_probe,
    quadratic_potential,
    stationary_moments_check,
)

__version__ = "0.1.0"
