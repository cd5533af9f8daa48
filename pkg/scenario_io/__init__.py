"""
Scenario loading and validation, result files, and parameter sweeps.
"""

from .loader import (
    Scenario,
    ScenarioError,
    apply_override,
    bundled_scenarios,
    load_scenario,
    parse_sweep_param,
    read_scenario_dict,
    scenario_from_dict,
    scenario_to_dict,
)
from .results import (
    diagnostics_frame,
    trajectory_frame,
    trials_frame,
    write_json,
    write_results,
    write_validation_report,
)
from .sweep import run_sweep

__all__ = [
    "Scenario",
    "ScenarioError",
    "apply_override",
    "bundled_scenarios",
    "diagnostics_frame",
    "load_scenario",
    "parse_sweep_param",
    "read_scenario_dict",
    "run_sweep",
    "scenario_from_dict",
    "scenario_to_dict",
    "trajectory_frame",
    "trials_frame",
    "write_json",
    "write_results",
    "write_validation_report",
]
