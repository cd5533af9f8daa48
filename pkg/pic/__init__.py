"""
Path-integral control estimation.
Generalized path values, the optimal path distribution and the joint optimal control estimate.
"""

from .estimator import (
    BatchScores,
    ControlEstimate,
    PathScore,
    ScoringError,
    ScoringOptions,
    StepWeights,
    estimate_control,
    estimate_from_batch,
    initial_control,
    path_distribution,
    path_value,
    score_batch,
    step_weight_matrix,
)

__all__ = [
    "BatchScores",
    "ControlEstimate",
    "PathScore",
    "ScoringError",
    "ScoringOptions",
    "StepWeights",
    "estimate_control",
    "estimate_from_batch",
    "initial_control",
    "path_distribution",
    "path_value",
    "score_batch",
    "step_weight_matrix",
]
