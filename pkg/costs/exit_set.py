from dataclasses import dataclass
from typing import Optional

import numpy as np

"""Exit condition of a flight: the horizon end, optionally also arrival of every agent in its goal ball."""


@dataclass(frozen=True)
class ExitSet:
    t_f: float
    goal_radius: Optional[float] = None
    t_start: float = 0.0

    def __post_init__(self):
        if not self.t_f > self.t_start:
            raise ValueError(f"exit time {self.t_f} must be after start time {self.t_start}")
        if self.goal_radius is not None and self.goal_radius <= 0:
            raise ValueError("goal_radius must be positive")

    def time_expired(self, t: float, tol: float = 1e-9) -> bool:
        return t >= self.t_f - tol

    def in_goal_region(self, positions: np.ndarray, goal_positions: np.ndarray) -> bool:
        """True when every agent position (N, 2) lies within goal_radius of its goal."""
        if self.goal_radius is None:
            return False
        dist = np.linalg.norm(np.asarray(positions) - np.asarray(goal_positions), axis=-1)
        return bool(np.all(dist <= self.goal_radius))

    def exited(self, t: float, positions: np.ndarray, goal_positions: np.ndarray) -> bool:
        return self.time_expired(t) or self.in_goal_region(positions, goal_positions)
