"""Krylov phi-function actions with coarse grid corrections."""
from .cgc import (
    CgcConfig,
    CgcReport,
    GridHierarchy,
    Level,
    cgc_multigrid,
    cgc_two_grid,
    coarse_error_estimate,
    commutator_norm_estimate,
    galerkin_operator,
)
from .krylov import (
    ArnoldiDecomposition,
    PhiSolveResult,
    arnoldi_extend,
    evaluate_iterate,
    find_delta,
    omega_ritz_estimate,
    phi_rt_solve,
    residual_norm,
    residual_restart_solve,
)
from .operators import CsrOperator, DenseOperator, LinearOperator, MatrixFreeOperator
from .oracle import dense_phi_reference, reference_solution, relative_error
from .problems import HeatProblem, build_hierarchy, heat1d, heat3d
from .smallmat import expm, phi_action, phi_scalar
from .transfer import GridSpec, TransferOperator, build_prolongation, split_vector

__version__ = "0.1.0"
