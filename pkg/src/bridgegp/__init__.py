"""Brownian-bridge Gaussian processes as a soft physics prior for the
Poisson equation on the unit cube."""

from .errors import (
    BridgeGpError,
    ConfigError,
    DomainError,
    ExpressionError,
    NumericalError,
    OrderMismatchError,
    ResonanceError,
    ResourceLimitError,
    SingularSystemError,
)
from .expressions import CompiledExpression, compile_expression
from .harness import (
    DesignMetrics,
    StudyReport,
    convergence_study,
    design_metrics,
    fit_loglog_slope,
    model_error_study,
)
from .kernels import (
    KernelSpec,
    SpdSolver,
    default_order,
    eigenvalue,
    eigenvalues,
    gram,
    kernel_diag,
    kernel_eval,
    kernel_matrix,
    rkhs_sq_norm,
)
from .pde import (
    ClosedFormSource,
    ExpressionSourceFamily,
    LinearSourceFamily,
    PdeSolution,
    SourceModel,
    SpectralSource,
    energy,
    energy_rkhs_shift,
    solve,
    source_energy_offset,
    zero_source,
)
from .regression import (
    FLAT,
    JEFFREYS,
    BetaMapResult,
    CoefficientObservations,
    CustomObservations,
    Dataset,
    HyperPrior,
    InversionResult,
    KrrSolution,
    MapEstimate,
    PointObservations,
    PosteriorModel,
    beta_gradient,
    beta_map,
    condition,
    fixed,
    invert_source,
    krr_solve,
    log_marginal,
    map_nonlinear,
)
from .sampling import (
    NestedReport,
    PriorSampler,
    nested_consistency,
    sample,
    sample_coefficients,
    sample_power_version,
    sample_values,
)
from .spectral import (
    QuadratureRule,
    SpectralField,
    basis_eval,
    basis_field,
    basis_matrix,
    default_rule,
    dirichlet_eigenvalues,
    enumerate_indices,
    evaluate,
    gauss_legendre_rule,
    index_array,
    l2_inner,
    l2_norm,
    project,
    zero_field,
)

__version__ = "0.1.0"
