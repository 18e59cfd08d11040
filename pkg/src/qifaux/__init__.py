"""Marginal-model estimation for longitudinal data.

Working-correlation score blocks and subgroup auxiliary-information moments
are stacked into one over-identified estimating function and fitted by
minimizing its empirical quadratic form. Includes plug-in covariance,
profile chi-square tests, synthetic-data generators and a Monte Carlo
harness.
"""

from .auxiliary import (
    AuxiliaryInfo,
    SubgroupPartition,
    estimate_phi,
    parse_subgroup_file,
    psi,
)
from .basis import BasisSet, CorrelationStructure, build_basis, correlation_matrix
from .errors import (
    DimensionTooSmall,
    EmptyDataset,
    EmptySubgroup,
    InvalidSize,
    MalformedRow,
    PartitionViolation,
    QifauxError,
    RankDeficient,
    SingularWeightMatrix,
    TooManyFailures,
    UnbalancedSubject,
    WeightRankWarning,
    ZeroVariance,
)
from .estimator import (
    ExtendedScoreConfig,
    FitOptions,
    FitResult,
    ProfileTestResult,
    fit,
    initial_estimate,
    moment_vector,
    objective,
    profile_test,
    relative_efficiency,
    score_jacobian,
    wald_interval,
    weight_matrix,
)
from .io import (
    ColumnSchema,
    LoadResult,
    emit_qq,
    emit_report,
    load_dataset,
    parse_design_config,
    parse_structured_report,
    split_sample,
    standardize_columns,
    write_dataset,
)
from .model import (
    Link,
    LongitudinalDataset,
    MarginalModelSpec,
    Subject,
    Variance,
    mean_derivative,
    mean_vector,
    variance_inv_sqrt,
)
from .simulation import (
    AuxMode,
    Hypothesis,
    MonteCarloSummary,
    PhiSource,
    SimulationDesign,
    analytic_four_group_phi,
    build_four_group_aux,
    build_two_group_aux,
    four_group_partition,
    generate_dataset,
    qq_data,
    replication_rng,
    run_monte_carlo,
    two_group_partition,
)

__version__ = "0.1.0"

__all__ = [
    "AuxMode",
    "AuxiliaryInfo",
    "BasisSet",
    "ColumnSchema",
    "CorrelationStructure",
    "DimensionTooSmall",
    "EmptyDataset",
    "EmptySubgroup",
    "ExtendedScoreConfig",
    "FitOptions",
    "FitResult",
    "Hypothesis",
    "InvalidSize",
    "Link",
    "LoadResult",
    "LongitudinalDataset",
    "MalformedRow",
    "MarginalModelSpec",
    "MonteCarloSummary",
    "PartitionViolation",
    "PhiSource",
    "ProfileTestResult",
    "QifauxError",
    "RankDeficient",
    "SimulationDesign",
    "SingularWeightMatrix",
    "Subject",
    "SubgroupPartition",
    "TooManyFailures",
    "UnbalancedSubject",
    "Variance",
    "WeightRankWarning",
    "ZeroVariance",
    "analytic_four_group_phi",
    "build_basis",
    "build_four_group_aux",
    "build_two_group_aux",
    "correlation_matrix",
    "emit_qq",
    "emit_report",
    "estimate_phi",
    "fit",
    "four_group_partition",
    "generate_dataset",
    "initial_estimate",
    "load_dataset",
    "mean_derivative",
    "mean_vector",
    "moment_vector",
    "objective",
    "parse_design_config",
    "parse_structured_report",
    "parse_subgroup_file",
    "profile_test",
    "psi",
    "qq_data",
    "relative_efficiency",
    "replication_rng",
    "run_monte_carlo",
    "score_jacobian",
    "split_sample",
    "standardize_columns",
    "two_group_partition",
    "variance_inv_sqrt",
    "wald_interval",
    "weight_matrix",
    "write_dataset",
]
