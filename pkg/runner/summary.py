"""Aggregation of trial results into per-time statistics."""

import logging
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .closed_loop import TrialResult

logger = logging.getLogger(__name__)


def _trial_frame(result: TrialResult, pairs: Sequence[Tuple[int, int]], goal_positions: np.ndarray,
                 position_dims: Sequence[int]) -> pd.DataFrame:
    frame = pd.DataFrame({"cycle": np.arange(len(result.times)), "t": result.times})
    for i, j in pairs:
        frame[f"dist_{i}_{j}"] = result.pair_distance(i, j, position_dims)
    errors = result.goal_errors(goal_positions, position_dims)
    for agent in range(1, errors.shape[1] + 1):
        frame[f"goal_err_{agent}"] = errors[:, agent - 1]
    return frame


def summarize_trials(results: Iterable[TrialResult], pairs: Sequence[Tuple[int, int]],
                     goal_positions: np.ndarray, position_dims: Sequence[int] = (0, 1)) -> pd.DataFrame:
    """
    Mean and standard deviation over successful trials, per time step, of every
    reported pair distance and every agent's distance to goal.

    Trials that stopped early only contribute to the steps they reached; the
    `trials` column counts contributors per step.
    """
    frames = [_trial_frame(r, pairs, goal_positions, position_dims) for r in results if r.ok]
    if not frames:
        logger.warning("No successful trials to summarize")
        return pd.DataFrame()
    long = pd.concat(frames, ignore_index=True)
    grouped = long.groupby("cycle", sort=True)
    summary = pd.DataFrame({"t": grouped["t"].first(), "trials": grouped.size()})
    for column in long.columns:
        if column in ("cycle", "t"):
            continue
        summary[f"{column}_mean"] = grouped[column].mean()
        summary[f"{column}_std"] = grouped[column].std(ddof=1)
    return summary.reset_index(drop=True)


def time_averaged_distance(results: Iterable[TrialResult], i: int, j: int,
                           position_dims: Sequence[int] = (0, 1)) -> Tuple[float, float, List[float]]:
    """Per-trial time average of |p_i - p_j|; returns (mean, standard error of the mean, per-trial values)."""
    values = [float(np.mean(r.pair_distance(i, j, position_dims))) for r in results if r.ok]
    if not values:
        return float("nan"), float("nan"), values
    se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return float(np.mean(values)), se, values
