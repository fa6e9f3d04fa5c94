"""Numerical verification laboratory for weighted space-time energy
estimates on the exterior of the light cone.

The package checks, at machine precision where possible, the divergence
identity behind a family of weighted estimates for wave operators, the
integral chains (linear split and nonlinear) that follow from it, the
coarea/surface-measure bookkeeping on the double null foliation, the decay
of boundary terms along foliation limits, and a compactly-supported-potential
construction showing the decay hypotheses are sharp.  A decision pipeline
combines the pieces into a uniqueness verdict for claimed solutions.
"""

__version__ = "0.1.0"

from .errors import (
    ConelabError,
    DomainError,
    GammaSignIndefinite,
    GridTooCoarse,
    InsufficientSequence,
    InvalidCutoffs,
    InvalidInput,
    InvalidPotential,
    InvalidWeightParams,
    MissingDerivative,
    ModeNotSupported,
    MostlyMasked,
    NotInwardDirected,
    OutsideExteriorRegion,
    RangeMismatch,
    RegionMismatch,
    RegionOutOfGrid,
    UnstableStep,
    WeightOverflow,
)
from .geometry import (
    AdmissibleRegion,
    Dimension,
    SpacetimePoint,
    hyperbolic,
    in_exterior,
    invert,
    metric_data,
    null_from_rect,
    point_from_fh,
    rect_from_null,
    sphere_area,
)
from .weights import (
    Potential,
    PotentialReport,
    PowerLog,
    Reparametrization,
    SplitHigh,
    SplitLow,
    SplitWeightParams,
    bulk_coefficient,
    classify_potential,
    envelope_check,
    gamma_v,
)
from .fields import (
    AnalyticField,
    GridSpec,
    ScalarField,
    box,
    conjugate,
    decay_functionals,
    field_to_csv,
    from_expr,
    materialize,
    scaling,
    scaling_star,
)
from .currents import (
    CurrentField,
    PowerU,
    ZeroU,
    boundary_bound_check,
    bulk_b,
    contract,
    current_general,
    current_nl,
    current_split,
    current_to_csv,
    divergence_analytic,
    divergence_fd,
)
from .quadrature import (
    BoundarySum,
    boundary_sum,
    bulk_integral,
    cone_integral,
    divergence_residual,
    hyperboloid_integral,
    inverted_hyperboloid_integral,
)
from .solver import (
    CauchyData,
    CounterexampleBundle,
    EvolutionResult,
    counterexample_build,
    exact_spherical_wave,
    solve,
    spherical_wave_data,
    static_multipole,
)
from .verifier import (
    CheckRecord,
    boundary_limit_experiment,
    carleman_nl_check,
    carleman_split_check,
    falsifiability_check,
    identity_convergence,
    identity_residual,
    induced_potential,
    manufactured_field,
    pointwise_inequality,
    split_cancellation,
    uniqueness_pipeline,
)
