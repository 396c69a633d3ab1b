"""Bi-level sorted-penalty regression.

Fits a convex combination of the sorted-L1 (variable level) and group
sorted-L1 (group level) penalties by adaptive three-operator splitting,
with weight sequences calibrated to control false discovery rates at both
levels, plus cross-validation, noise-scaled selection, and a seeded
Monte-Carlo harness.
"""

__version__ = "0.1.0"

from .data import (
    Family,
    GroupedDataset,
    GroupPartition,
    StandardizationRecord,
    split,
    standardize,
    unstandardize_coefficients,
)
from .dataio import load_design, load_groups, load_response
from .errors import SgsError
from .metrics import (
    ConfusionSummary,
    SelectionMetrics,
    compute_metrics,
    confusion_from_sets,
)
from .prox import (
    group_sorted_l1_penalty,
    prox_gslope,
    prox_slope,
    sorted_l1_penalty,
)
from .selection import (
    CvResult,
    NoiseEstimate,
    adaptively_scaled_sgs,
    cross_validate,
    scaled_sgs,
)
from .sequences import (
    GroupKind,
    PenaltySpec,
    SortedWeights,
    VariableKind,
    build_penalty_spec,
    gslope_max_sequence,
    gslope_mean_sequence,
    sgs_gmax_sequence,
    sgs_gmean_sequence,
    sgs_vmax_sequence,
    sgs_vmean_sequence,
    slope_bh_sequence,
)
from .simulate import (
    CorrelatedScenario,
    EvenGrouping,
    FixedSignal,
    ModelSetup,
    OrthogonalScenario,
    RandomSignal,
    SimulationReport,
    UnevenBands,
    generate_correlated,
    generate_orthogonal,
    preset_scenario,
    run_fdr_experiment,
    run_selection_study,
)
from .solver import (
    SgsSolution,
    SolverConfig,
    atos_fit,
    auto_initial_step,
    fit_path,
    lambda_max,
    objective_value,
    predict,
    predict_labels,
    spec_for_lambda,
)

__all__ = [
    "__version__",
    "Family",
    "GroupedDataset",
    "GroupPartition",
    "StandardizationRecord",
    "split",
    "standardize",
    "unstandardize_coefficients",
    "load_design",
    "load_groups",
    "load_response",
    "SgsError",
    "ConfusionSummary",
    "SelectionMetrics",
    "compute_metrics",
    "confusion_from_sets",
    "group_sorted_l1_penalty",
    "prox_gslope",
    "prox_slope",
    "sorted_l1_penalty",
    "CvResult",
    "NoiseEstimate",
    "adaptively_scaled_sgs",
    "cross_validate",
    "scaled_sgs",
    "GroupKind",
    "PenaltySpec",
    "SortedWeights",
    "VariableKind",
    "build_penalty_spec",
    "gslope_max_sequence",
    "gslope_mean_sequence",
    "sgs_gmax_sequence",
    "sgs_gmean_sequence",
    "sgs_vmax_sequence",
    "sgs_vmean_sequence",
    "slope_bh_sequence",
    "CorrelatedScenario",
    "EvenGrouping",
    "FixedSignal",
    "ModelSetup",
    "OrthogonalScenario",
    "RandomSignal",
    "SimulationReport",
    "UnevenBands",
    "generate_correlated",
    "generate_orthogonal",
    "preset_scenario",
    "run_fdr_experiment",
    "run_selection_study",
    "SgsSolution",
    "SolverConfig",
    "atos_fit",
    "auto_initial_step",
    "fit_path",
    "lambda_max",
    "objective_value",
    "predict",
    "predict_labels",
    "spec_for_lambda",
]
