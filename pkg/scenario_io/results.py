"""Result files of a run: trajectories, cycle diagnostics, aggregate summary and the scenario echo."""

import json
import logging
import os
from dataclasses import asdict
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from runner import TrialResult, summarize_trials

from .loader import Scenario, scenario_to_dict

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
STATE_COLUMNS = {"unicycle": ("x", "y", "v", "phi"), "integrator": ("x",)}
INPUT_COLUMNS = {"unicycle": ("u", "omega"), "integrator": ("u",)}


def _columns(names: Dict[str, Sequence[str]], kind: str, size: int, prefix: str) -> List[str]:
    return list(names.get(kind, [f"{prefix}{k}" for k in range(size)]))


def trajectory_frame(result: TrialResult, model_kind: str) -> pd.DataFrame:
    """
    One row per (t, agent). The control on a row is the one applied from t to
    t + Δ, so the final time step has none.
    """
    n_steps, n_agents, state_dim = result.states.shape
    input_dim = result.controls.shape[-1]
    state_cols = _columns(STATE_COLUMNS, model_kind, state_dim, "s")
    input_cols = _columns(INPUT_COLUMNS, model_kind, input_dim, "u")
    controls = np.full((n_steps, n_agents, input_dim), np.nan)
    controls[:result.n_cycles] = result.controls
    frame = pd.DataFrame({
        "trial": result.trial,
        "t": np.repeat(result.times, n_agents),
        "agent": np.tile(np.arange(1, n_agents + 1), n_steps),
    })
    for k, col in enumerate(state_cols):
        frame[col] = result.states[:, :, k].reshape(-1)
    for k, col in enumerate(input_cols):
        frame[col] = controls[:, :, k].reshape(-1)
    return frame


def diagnostics_frame(results: Sequence[TrialResult]) -> pd.DataFrame:
    rows = [asdict(d) for r in results for d in r.diagnostics]
    return pd.DataFrame(rows)


def trials_frame(results: Sequence[TrialResult], scenario: Scenario) -> pd.DataFrame:
    """Seed, status and final goal errors of every trial."""
    rows = []
    dims = scenario.costs.position_dims
    for r in results:
        row = {"trial": r.trial, "seed": str(r.seed), "status": r.status, "error": r.error,
               "cycles": r.n_cycles, "t_end": float(r.times[-1])}
        final = r.goal_errors(scenario.goal_positions, dims)[-1]
        for agent, err in enumerate(final, start=1):
            row[f"final_goal_err_{agent}"] = float(err)
        rows.append(row)
    return pd.DataFrame(rows)


def write_results(results: Sequence[TrialResult], scenario: Scenario, out_dir: str) -> List[str]:
    """Write every result file of a run into out_dir and return the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for r in results:
        path = os.path.join(out_dir, f"trajectories_trial_{r.trial:03d}.csv")
        trajectory_frame(r, scenario.model.name).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        written.append(path)

    path = os.path.join(out_dir, "diagnostics.csv")
    diagnostics_frame(results).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    written.append(path)

    path = os.path.join(out_dir, "trials.csv")
    trials_frame(results, scenario).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    written.append(path)

    summary = summarize_trials(results, scenario.report_pairs, scenario.goal_positions,
                               scenario.costs.position_dims)
    path = os.path.join(out_dir, "summary.csv")
    summary.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    written.append(path)

    path = os.path.join(out_dir, "scenario_echo.json")
    write_json(scenario_to_dict(scenario), path)
    written.append(path)

    logger.info(f"Wrote {len(written)} result files to {out_dir}")
    return written


def write_json(payload: Dict[str, Any], path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
    return path


def write_validation_report(report, path: str) -> str:
    """Machine-readable pass/fail report of a validation suite."""
    write_json(report.to_dict(), path)
    logger.info(f"Validation report saved to: {path}")
    return path
