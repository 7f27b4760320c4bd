"""Validation harness: metrics, cross-validation schemes, stability and statistics."""

from ..metrics import auroc, balanced_accuracy, brier, classification_metrics, f1_score
from ..splits import assert_disjoint, stratified_group_kfold
from .cv import (
    CVReport,
    FoldResult,
    StabilityReport,
    consensus_ranking,
    evaluate_split,
    feature_ablation,
    lodo_cv,
    nested_cv,
    parallel_map,
    roc_csv,
    roc_points,
    stability,
)
from .stats import (
    bootstrap_ci,
    cliffs_delta,
    jaccard,
    mann_whitney_cliffs,
    spearman_rho,
    stability_metrics,
    stability_score,
)

metrics = classification_metrics
