"""Combined compact and prefactored compact differentiation for first and second derivatives."""

from .banded import SingularSystemError, block_thomas, cyclic_block_thomas
from .estimators import CombinedCompactDerivative, PrefactoredCompactDerivative
from .prefactored import (
    BoundarySeed,
    SweepStability,
    backward_sweep,
    combine,
    forward_sweep,
    operator_taylor,
    prefactored_derivatives,
    sweep_stability,
)
from .spectral import (
    DegenerateFitError,
    RationalSymbolForm,
    SingularSymbolError,
    SymbolSample,
    combined_symbol_oracle,
    extract_rational_form,
    prefactored_symbol,
    printed_symbol,
)
from .stencils import (
    CombinedStencil,
    DerivativePair,
    ExactBoundary,
    GridFunction,
    build_ccd6,
    build_ccd8,
    get_stencil,
    read_grid_csv,
    solve_combined,
    solve_combined_dense,
    stencil_residual,
)
from .verify import (
    ConvergenceResult,
    ConvergenceRow,
    DispersionCurve,
    SymmetryReport,
    convergence_study,
    dispersion_curve,
    polynomial_audit,
    symmetry_report,
)
from .weights import (
    PrefactoredWeights,
    SolveReport,
    ValidationReport,
    WeightSolution,
    compare_systems,
    load_weights,
    mirror_backward,
    multistart,
    newton_solve,
    residuals_printed,
    residuals_spectral,
    solve_weights,
    validate,
)

__version__ = "0.1.0"
