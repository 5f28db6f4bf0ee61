"""Class-balanced dynamic acquisition for pixel-wise active learning."""

__version__ = "0.1.0"

from .core import (
    ActiveLabelStore,
    BudgetSchedule,
    ClassStats,
    DatasetShape,
    PseudoLabelMap,
    ScoreMatrix,
    apply_weights,
    class_budget,
    class_budgets,
    class_weight,
)
from .errors import (
    BudgetError,
    CBDAError,
    ClassIndexError,
    ConfigError,
    ConsistencyError,
    DuplicateSelectionError,
    EmptySelectionError,
    ScheduleError,
    ShapeError,
)
from .heuristics import (
    ProbabilityMap,
    compute_scores,
    pseudo_label,
    score_entropy,
    score_margin,
    score_region_impurity,
)
from .metrics import (
    ClassDistribution,
    ImbalanceReport,
    class_distribution,
    imbalance_report,
    imbalance_score,
    selection_histogram,
)
from .scenario import (
    GroundTruth,
    LoopReport,
    ScenarioConfig,
    generate_ground_truth,
    run_loop,
    surrogate_probabilities,
)
from .selection import (
    PixelRef,
    ScoreStack,
    SelectionResult,
    iteration_budget,
    run_cbda_iteration,
    select_dynamic,
    select_image_wise,
    select_region,
)

__all__ = [
    "ActiveLabelStore",
    "BudgetError",
    "BudgetSchedule",
    "CBDAError",
    "ClassDistribution",
    "ClassIndexError",
    "ClassStats",
    "ConfigError",
    "ConsistencyError",
    "DatasetShape",
    "DuplicateSelectionError",
    "EmptySelectionError",
    "GroundTruth",
    "ImbalanceReport",
    "LoopReport",
    "PixelRef",
    "ProbabilityMap",
    "PseudoLabelMap",
    "ScenarioConfig",
    "ScheduleError",
    "ScoreMatrix",
    "ScoreStack",
    "SelectionResult",
    "ShapeError",
    "apply_weights",
    "class_budget",
    "class_budgets",
    "class_distribution",
    "class_weight",
    "compute_scores",
    "generate_ground_truth",
    "imbalance_report",
    "imbalance_score",
    "iteration_budget",
    "pseudo_label",
    "run_cbda_iteration",
    "run_loop",
    "score_entropy",
    "score_margin",
    "score_region_impurity",
    "select_dynamic",
    "select_image_wise",
    "select_region",
    "selection_histogram",
    "surrogate_probabilities",
]
