"""certlap: certified Laplace approximation of peaked integrals.

Leading-order values of integrals of g(x) exp(N f(x, N)) over boxes, with
numerically certified remainder enclosures, a high-accuracy quadrature
oracle, and a probability harness for the induced Gibbs measure (law of
large numbers, fluctuation limits, drift of the maximizer).
"""

from .catalog import catalog, catalog_names, get_problem
from .constants import ConstantsReport, audit_constants, estimate_constants, refine_constants
from .derivatives import (
    DerivativeBundle,
    bundle_at,
    default_fd_step,
    min_singular_value,
    operator_norm_hessian,
    taylor_cubic_bound,
    third_tensor_norm_bound,
)
from .gibbs import (
    FluctuationModel,
    GibbsMeasure,
    MgfReport,
    SampleBatch,
    build_fluctuation_model,
    empirical_limit_test,
    fluctuation_sweep,
    gibbs_measure,
    ks_statistic,
    maximum_drift_check,
    measure_of,
    mgf_X,
    mgf_Y,
    sample,
    tilted_maximizer_check,
    transform_to_fluctuations,
)
from .laplace import (
    LaplaceResult,
    approx_1d_boundary,
    approx_boundary_md,
    approx_interior,
    approximate,
    gaussian_tail_bound,
)
from .oracle import OracleValue, integrate, tail_integral
from .problems import (
    BOUNDARY,
    INTERIOR,
    BoxDomain,
    EpsilonSchedule,
    MaximumInfo,
    ProblemSpec,
    ScalarField,
    assemble_f,
    classify_maximum,
    constant_field,
    default_neighborhood,
    exponential_field,
    locate_maximum,
    polynomial_field,
    power_epsilon,
    rotate_problem,
    verify_unique_maximum,
    zero_epsilon,
)

__version__ = "0.1.0"
