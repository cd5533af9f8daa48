import logging
import os
import re
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from runner import run_trials, time_averaged_distance

from .loader import ScenarioError, apply_override, scenario_from_dict
from .results import FLOAT_FORMAT, write_results

"""Weight ablations: one full run per parameter value, plus a one-line summary per value."""

logger = logging.getLogger(__name__)


def _label(assignments: Sequence[Tuple[str, Any]]) -> str:
    text = "__".join(f"{path}={value}" for path, value in assignments)
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text)


def run_sweep(
    raw: Dict[str, Any],
    params: Sequence[Tuple[str, List[Any]]],
    out_dir: str,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    max_workers: int = 1,
    agent_workers: int = 1,
) -> pd.DataFrame:
    """
    Run the scenario once per value. Several parameters are swept together,
    value k of each applied at step k, so they must list equally many values.
    """
    if not params:
        raise ScenarioError("no sweep parameter given")
    lengths = {len(values) for _, values in params}
    if len(lengths) != 1:
        raise ScenarioError("swept parameters must have the same number of values")
    n_values = lengths.pop()

    rows = []
    for k in tqdm(range(n_values), desc="Sweep values"):
        assignments = [(path, values[k]) for path, values in params]
        updated = raw
        for path, value in assignments:
            updated = apply_override(updated, path, value)
        label = _label(assignments)
        scenario = scenario_from_dict(updated).with_output_dir(os.path.join(out_dir, label))
        n_trials = trials if trials is not None else scenario.trials
        base_seed = seed if seed is not None else scenario.seed
        scenario.trials, scenario.seed = n_trials, base_seed
        logger.info(f"Sweep value {k + 1}/{n_values}: {label}")
        results = run_trials(scenario, n_trials, base_seed, max_workers=max_workers, progress=False,
                             agent_workers=agent_workers)
        write_results(results, scenario, scenario.output_dir)

        row = {"label": label, "failed": sum(1 for r in results if not r.ok)}
        row.update({path: value for path, value in assignments})
        for i, j in scenario.report_pairs:
            mean, se, _ = time_averaged_distance(results, i, j, scenario.costs.position_dims)
            row[f"dist_{i}_{j}_time_avg_mean"] = mean
            row[f"dist_{i}_{j}_time_avg_se"] = se
        rows.append(row)

    summary = pd.DataFrame(rows)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep_summary.csv")
    summary.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Sweep summary saved to: {path}")
    return summary
