"""Partial-identification bounds for transporting trial effects.

A randomized trial identifies effects in its own population; carrying
them to a target population through baseline covariates leaves an
unidentified outcome-shift component.  This package computes the sharp
interval of target-population average treatment effects compatible with
a bounded likelihood ratio on that component, along with estimation
baselines, data generators, and a simulation harness.
"""

from .core import (
    ArmDistribution,
    BoundInterval,
    DataFormatError,
    DegenerateResampleError,
    EmptyArmError,
    Envelope,
    GridError,
    InvalidLambdaError,
    InvalidWeightError,
    Multipliers,
    RejectionStallError,
    SensitivityParam,
    SeparationError,
    TargetCovariates,
    TboundsError,
    TrialDataset,
    TrialUnit,
    UnsupportedKindError,
    as_lambda,
    build_arm_distribution,
    validate_weights,
)
from .bounds import (
    ate_bounds,
    default_lambda_grid,
    extract_multipliers,
    greedy_arm_bound,
    oracle_arm_bound,
    quantile_functional_bound,
    sensitivity_envelope,
    worst_case_bounds,
)
from .weights import (
    MembershipModel,
    count_clamped,
    fit_membership,
    inverse_odds_weights,
    oracle_gaussian_weights,
    weight_diagnostics,
)
from .dgp import (
    BoundedConfig,
    DgpSpec,
    SimDraw,
    generate,
    preset,
    tail_trimmed_lambda,
    true_ate,
)
from .baselines import BootstrapResult, bootstrap_ci, naive_point_estimate
from .experiments import (
    BangBangSnapshot,
    LambdaRow,
    ReplicateFailure,
    ReplicationResult,
    SweepSummary,
    bangbang_snapshot,
    baselines_study,
    breakeven_lambda,
    breakeven_study,
    id_vs_est_study,
    oracle_width,
    robustness_study,
    run_sweep,
    scaling_study,
    weight_sensitivity_study,
    wilson_interval,
)

__version__ = "0.1.0"

__all__ = [
    "ArmDistribution",
    "BangBangSnapshot",
    "BoundInterval",
    "BoundedConfig",
    "BootstrapResult",
    "DataFormatError",
    "DegenerateResampleError",
    "DgpSpec",
    "EmptyArmError",
    "Envelope",
    "GridError",
    "InvalidLambdaError",
    "InvalidWeightError",
    "LambdaRow",
    "MembershipModel",
    "Multipliers",
    "RejectionStallError",
    "ReplicateFailure",
    "ReplicationResult",
    "SensitivityParam",
    "SeparationError",
    "SimDraw",
    "SweepSummary",
    "TargetCovariates",
    "TboundsError",
    "TrialDataset",
    "TrialUnit",
    "UnsupportedKindError",
    "as_lambda",
    "ate_bounds",
    "bangbang_snapshot",
    "baselines_study",
    "bootstrap_ci",
    "breakeven_lambda",
    "breakeven_study",
    "build_arm_distribution",
    "count_clamped",
    "default_lambda_grid",
    "extract_multipliers",
    "fit_membership",
    "generate",
    "greedy_arm_bound",
    "id_vs_est_study",
    "inverse_odds_weights",
    "naive_point_estimate",
    "oracle_arm_bound",
    "oracle_gaussian_weights",
    "oracle_width",
    "preset",
    "quantile_functional_bound",
    "robustness_study",
    "run_sweep",
    "scaling_study",
    "sensitivity_envelope",
    "tail_trimmed_lambda",
    "true_ate",
    "validate_weights",
    "weight_diagnostics",
    "weight_sensitivity_study",
    "wilson_interval",
    "worst_case_bounds",
    "__version__",
]
