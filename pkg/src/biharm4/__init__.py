"""Ground states of the fourth-order radial field equation on R^4.

The package computes the constrained minimum

    T = inf { 0.5 * int |D^2 u|^2 :  int G(u) >= 0,  u != 0 }

over decaying radial profiles on a truncated domain, extracts the
stationarity multiplier, rescales to a solution of ``Lap^2 u = g(u)``, and
verifies the classical and fourth-order logarithmic Sobolev inequalities
together with their equality cases at desk scale.
"""

from .errors import (
    AdmissibilityError,
    Biharm4Error,
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DegenerateMinimizerError,
    DependencyError,
    InfeasibilityError,
    NormalizationError,
    NotAnExtremizerError,
    ParameterError,
)
from .inequalities import (
    InequalityReport,
    ReconstructionResult,
    biharmonic_lsi,
    classical_lsi,
    constant_bound,
    interpolation,
    make_corpus,
    normalize_field,
    reconstruct_groundstate,
)
from .oracle import GaussianProfile, closed_form_report, moments
from .potentials import (
    PotentialModel,
    ValidationReport,
    load_potential_config,
    make_defocusing_well,
    make_logarithmic,
    make_table,
    potential_from_config,
    validate,
)
from .radial import (
    EnergyReport,
    RadialField,
    RadialGrid,
    build_grid,
    dilate,
    energy_K,
    entropy,
    field_from_json,
    field_to_json,
    grad_sq,
    hessian_sq,
    integrate,
    l2_sq,
    laplacian,
    load_field_csv,
    sample_profile,
    save_field_csv,
    zero_field,
)
from .solver import (
    GroundStateResult,
    SolverConfig,
    action,
    extract_lambda,
    minimize,
    pde_residual,
    potential_V,
    rescale_to_groundstate,
)

__version__ = "0.1.0"

validate_potential = validate
