"""Generalized maximum-entropy distributions and robust-Bayes acts for
finite-outcome decision games under mean-value constraints."""

from .core import (
    ACT_DENSITY,
    ACT_DISTRIBUTION,
    ACT_SCALAR,
    Act,
    BaseMeasure,
    CombinatorialBlowup,
    DimensionMismatch,
    Distribution,
    Infeasible,
    LambdaOutOfRange,
    NegativeWeight,
    NotNormalized,
    SampleSpace,
    Statistic,
    UndefinedExpectation,
    ZeroBaseMass,
    expected_loss,
    ext_dot,
    mixture,
    moment,
    validate_distribution,
)
from .losses import (
    BregmanModel,
    BrierModel,
    ConvexGenerator,
    InvalidGenerator,
    LogModel,
    LossModel,
    ProprietyReport,
    ProprietyViolation,
    QuadraticModel,
    ZeroOneModel,
    bregman_model,
    brier_model,
    check_proper,
    log_model,
    power_generator,
    quadratic_model,
    square_generator,
    xlogx_generator,
    zero_one_model,
)
from .divergence import (
    EqualizerReport,
    InfiniteReferenceLoss,
    MixtureIdentityReport,
    PythagoreanReport,
    RelativeModel,
    discrepancy,
    div,
    equalizer_check,
    find_neutral,
    mixture_identities,
    pythagorean_check,
    relative_model,
)
from .constraints import (
    GammaTau,
    VertexSet,
    closed_under_conditioning,
    contains,
    feasible,
    hull_interior,
    vertices,
)
from .maxent import (
    ActFamily,
    BetaDerivativeReport,
    ConjugacyReport,
    FamilyTrace,
    MaxIterExceeded,
    NewtonDivergence,
    SaddlePoint,
    SupportScan,
    TiltResult,
    TraceInvariantViolation,
    beta_derivative_check,
    conjugacy_check,
    lafferty_family,
    natural_tilt,
    solve,
    solve_brier,
    solve_generic,
    solve_log,
    solve_zero_one,
    specific_entropy,
    support_scan,
    trace_family,
)
from .verify import (
    GameSolution,
    SaddleCheck,
    USetReport,
    UpperValueResult,
    lp_game_value,
    restricted_upper_value,
    u_set_check,
    verify_saddle,
)
from .derived import (
    CapacityResult,
    EqualizationReport,
    Prior,
    StatModel,
    blahut_arimoto,
    capacity_solve,
    derived_loss,
    equalization_report,
    value_of_information,
)

__version__ = "0.1.0"
