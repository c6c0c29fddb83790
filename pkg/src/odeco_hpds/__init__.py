"""Analysis toolkit for homogeneous polynomial dynamical systems (HPDS)
represented by tensors: orthogonal (odeco) decompositions, closed-form
solutions and blow-up times, stability verdicts, constant-control
solutions, and transformability of general systems to odeco form."""

__version__ = "0.1.0"

from .control import (
    ControlledModalProblem,
    controlled_equilibrium,
    controlled_solution,
    controlled_states,
    gauss_g,
    implicit_time,
    implicit_time_hypergeometric,
    modal_escape_time,
    solve_modal,
)
from .dynamics import (
    ASYMPTOTICALLY_STABLE,
    STABLE,
    UNSTABLE,
    ExplicitSolution,
    HPDSystem,
    StabilityReport,
    classify_by_unfolding,
    classify_global_even,
    classify_stability,
    equilibrium_structure,
    eval_solution,
    eval_solution_k2,
    explicit_solution,
    in_region_of_attraction,
    modal_coordinates,
    solution_states,
)
from .oracle import Trajectory, escape_time_estimate, integrate, states_at
from .spectral import (
    OdecoDecomposition,
    ZEigenPair,
    is_odeco,
    mu_max,
    odeco_decompose,
    reconstruct,
    z_eigenpair,
    z_spectral_radius,
)
from .tensor_core import (
    AlmostSymTensor,
    PolynomialSpec,
    SymTensor,
    apply,
    as_supersymmetric,
    frob_distance,
    from_polynomial,
    polyval,
    symmetric_tensor_from_form,
    symmetrize,
    to_polynomial,
    unfold_psi,
)
from .transform import (
    TransformModel,
    build_transformation,
    fit_structured_cpd,
    is_transformable,
    solve_general,
    transformed_decomposition,
    transformed_tensor,
)

__all__ = [
    "__version__",
    # tensor_core
    "AlmostSymTensor", "PolynomialSpec", "SymTensor", "apply",
    "as_supersymmetric", "frob_distance", "from_polynomial", "polyval",
    "symmetric_tensor_from_form", "symmetrize", "to_polynomial", "unfold_psi",
    # spectral
    "OdecoDecomposition", "ZEigenPair", "is_odeco", "mu_max",
    "odeco_decompose", "reconstruct", "z_eigenpair", "z_spectral_radius",
    # dynamics
    "ASYMPTOTICALLY_STABLE", "STABLE", "UNSTABLE", "ExplicitSolution",
    "HPDSystem", "StabilityReport", "classify_by_unfolding",
    "classify_global_even", "classify_stability", "equilibrium_structure",
    "eval_solution", "eval_solution_k2", "explicit_solution",
    "in_region_of_attraction", "modal_coordinates", "solution_states",
    # control
    "ControlledModalProblem", "controlled_equilibrium", "controlled_solution",
    "controlled_states", "gauss_g", "implicit_time",
    "implicit_time_hypergeometric", "modal_escape_time", "solve_modal",
    # oracle
    "Trajectory", "escape_time_estimate", "integrate", "states_at",
    # transform
    "TransformModel", "build_transformation", "fit_structured_cpd",
    "is_transformable", "solve_general", "transformed_decomposition",
    "transformed_tensor",
]
