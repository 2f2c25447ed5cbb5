"""Simulator for nonlinear diffusion SPDEs with gradient transport noise.

The package discretizes, on (0,1)^d with zero Dirichlet data,

    dX = (nu Delta X + Delta psi(X) + 1/2 div(b^T b grad X)) dt
         + sum_i (b_i . grad X) dbeta_i,

the Ito form of a Stratonovich gradient-noise equation, where psi is a
maximal monotone graph regularized through its Yosida approximation.
Alongside the continuum solver it ships the discrete sandpile automaton
whose continuum counterpart is the sign-graph (m = 0) case.
"""

__version__ = "0.1.0"

from .errors import (
    AdmissibilityError,
    ConfigError,
    MonteCarloError,
    PathError,
    SpmsimError,
    StepError,
)
from .grid import GridOperators, GridSpec
from .monotone import (
    FastDiffusion,
    GrowthReport,
    Linear,
    PowerLaw,
    Sign,
    YosidaParams,
    growth_check,
    minimal_section,
    resolvent,
    yosida,
    yosida_derivative,
    yosida_with_derivative,
)
from .noise import (
    AdmissibilityReport,
    CtildeEstimate,
    VectorFieldSet,
    brownian_increments,
    build_fields,
    check_admissibility,
    estimate_ctilde,
    gamma_of_b,
    noise_increment,
    stratonovich_correction,
)
from .solver import (
    CauchyReport,
    Ensemble,
    SimulationPath,
    SolverConfig,
    monte_carlo,
    simulate_path,
    step,
    yosida_continuation,
)
from .extinction import (
    CmEstimate,
    ExtinctionReport,
    ExtinctionSetup,
    build_setup,
    dimension_condition,
    estimate_cm,
    extinction_integrand,
    supermartingale_check,
    survival_curve,
    theoretical_bound,
    verify_extinction_bound,
)
from .sandpile import (
    AvalancheRecord,
    Histogram,
    SandpileLattice,
    SocStatistics,
    apply_toppling_matrix,
    drive,
    log_binned_histogram,
    run_soc,
    stabilize,
)
from .rng import stream

__all__ = [
    "__version__",
    # errors
    "SpmsimError",
    "ConfigError",
    "AdmissibilityError",
    "StepError",
    "PathError",
    "MonteCarloError",
    # grid
    "GridSpec",
    "GridOperators",
    # monotone graphs
    "FastDiffusion",
    "Sign",
    "Linear",
    "PowerLaw",
    "YosidaParams",
    "GrowthReport",
    "resolvent",
    "yosida",
    "yosida_derivative",
    "yosida_with_derivative",
    "minimal_section",
    "growth_check",
    # noise
    "VectorFieldSet",
    "AdmissibilityReport",
    "CtildeEstimate",
    "build_fields",
    "gamma_of_b",
    "estimate_ctilde",
    "check_admissibility",
    "stratonovich_correction",
    "noise_increment",
    "brownian_increments",
    # solver
    "SolverConfig",
    "SimulationPath",
    "Ensemble",
    "CauchyReport",
    "step",
    "simulate_path",
    "monte_carlo",
    "yosida_continuation",
    # extinction
    "ExtinctionSetup",
    "ExtinctionReport",
    "CmEstimate",
    "dimension_condition",
    "build_setup",
    "estimate_cm",
    "theoretical_bound",
    "survival_curve",
    "supermartingale_check",
    "verify_extinction_bound",
    "extinction_integrand",
    # sandpile
    "SandpileLattice",
    "AvalancheRecord",
    "SocStatistics",
    "Histogram",
    "apply_toppling_matrix",
    "drive",
    "stabilize",
    "run_soc",
    "log_binned_histogram",
    # rng
    "stream",
]
