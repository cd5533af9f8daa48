# Package marker for validation
from .oracles import (
    DesirabilityEstimate,
    GradientReport,
    OracleSystem,
    desirability_direct_mc,
    desirability_discretized,
    gradient_check,
    lq1d_control_from_desirability,
    lq1d_desirability,
    lq1d_optimal_control,
    random_states,
)
from .suites import (
    SUITES,
    CheckResult,
    ValidationReport,
    lq_system,
    run_invariant_suite,
    run_oracle_suite,
    toy_scenario_dict,
    unicycle_pair_system,
)

__all__ = [
    "SUITES",
    "CheckResult",
    "DesirabilityEstimate",
    "GradientReport",
    "OracleSystem",
    "ValidationReport",
    "desirability_direct_mc",
    "desirability_discretized",
    "gradient_check",
    "lq1d_control_from_desirability",
    "lq1d_desirability",
    "lq1d_optimal_control",
    "lq_system",
    "random_states",
    "run_invariant_suite",
    "run_oracle_suite",
    "toy_scenario_dict",
    "unicycle_pair_system",
]
