# Package marker for costs
from .control_weight import derive_control_weight, joint_control_weight
from .exit_set import ExitSet
from .running import (
    CostError,
    CostSpec,
    Obstacle,
    TerminalCost,
    OBSTACLE_CHECKS,
    finite_difference_gradient,
    path_running_costs,
    running_cost,
    running_cost_array,
    running_cost_gradient,
    terminal_cost,
    terminal_cost_array,
    unclamped_running_cost,
)

__all__ = [
    "CostError",
    "CostSpec",
    "ExitSet",
    "Obstacle",
    "TerminalCost",
    "derive_control_weight",
    "OBSTACLE_CHECKS",
    "finite_difference_gradient",
    "joint_control_weight",
    "path_running_costs",
    "running_cost",
    "running_cost_array",
    "running_cost_gradient",
    "terminal_cost",
    "terminal_cost_array",
    "unclamped_running_cost",
]
