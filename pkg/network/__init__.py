"""
Communication network package.
Agent graphs and the factorial subsystem (center agent + neighbors) of each agent.
"""

from .graph import (
    CommGraph,
    GraphError,
    Subsystem,
    all_subsystems,
    binary_tree_graph,
    complete_graph,
    line_graph,
    loop_graph,
    neighbors,
    subsystem,
)

__all__ = [
    "CommGraph",
    "GraphError",
    "Subsystem",
    "all_subsystems",
    "binary_tree_graph",
    "complete_graph",
    "line_graph",
    "loop_graph",
    "neighbors",
    "subsystem",
]
