"""
Joint state costs of a factorial subsystem.

The running cost of the subsystem centered on agent i is

    q_i = w_ii (|p_i - p_i^goal| - d_i) + sum_j w_ij (|p_i - p_j| - d_ij)
          + sum_j a_ij |x_i(d) - x_j(d)|^2

over the neighbors j of i. If the center sits inside an obstacle the value is
replaced by the obstacle penalty, and the result is clamped at zero. Along
a rollout the penalty is also charged for a step whose straight segment
crosses an obstacle (see path_running_costs).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from network import Subsystem
from dynamics import JointState

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]
OBSTACLE_CHECKS = ("segment", "point")


class CostError(ValueError):
    """Raised for invalid weights, regularizers or control-weight matrices."""


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle; the center agent pays `penalty` while inside it (boundary included)."""
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    penalty: float = 120.0

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise CostError(f"obstacle bounds are inverted: {self}")
        if self.penalty < 0:
            raise CostError("obstacle penalty must be nonnegative")

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = points[..., 0]
        y = points[..., 1]
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    def crosses(self, start: np.ndarray, end: np.ndarray) -> np.ndarray:
        """True where the straight segment start -> end (..., 2) touches the rectangle (slab test)."""
        start = np.asarray(start, dtype=float)
        step = np.asarray(end, dtype=float) - start
        enter = np.zeros(step.shape[:-1])
        leave = np.ones(step.shape[:-1])
        hit = np.ones(step.shape[:-1], dtype=bool)
        for axis, (lo, hi) in enumerate(((self.x_min, self.x_max), (self.y_min, self.y_max))):
            p, d = start[..., axis], step[..., axis]
            still = d == 0.0
            hit &= ~still | ((p >= lo) & (p <= hi))
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lo, t_hi = (lo - p) / d, (hi - p) / d
            enter = np.maximum(enter, np.where(still, -np.inf, np.minimum(t_lo, t_hi)))
            leave = np.minimum(leave, np.where(still, np.inf, np.maximum(t_lo, t_hi)))
        return hit & (enter <= leave)


@dataclass(frozen=True)
class TerminalCost:
    """phi on the exit state: 'zero', or 'quadratic' = kappa * sum_j |p_j - p_j^goal|^2 over members."""
    kind: str = "zero"
    kappa: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "quadratic"):
            raise CostError(f"unknown terminal cost kind {self.kind!r}")
        if self.kappa < 0 or self.offset < 0:
            raise CostError("terminal cost must be nonnegative")


@dataclass(eq=False)
class CostSpec:
    goals: np.ndarray
    goal_weights: Dict[int, float]
    pair_weights: Dict[Pair, float] = field(default_factory=dict)
    goal_regularizers: Dict[int, float] = field(default_factory=dict)
    pair_regularizers: Dict[Pair, float] = field(default_factory=dict)
    alignment_weights: Dict[Pair, float] = field(default_factory=dict)
    obstacles: Tuple[Obstacle, ...] = ()
    terminal: TerminalCost = field(default_factory=TerminalCost)
    lam: float = 1.0
    control_weight: Optional[np.ndarray] = None
    position_dims: Tuple[int, ...] = (0, 1)
    nonact_dim: int = 2
    obstacle_check: str = "segment"

    def __post_init__(self):
        self.goals = np.atleast_2d(np.asarray(self.goals, dtype=float))
        self.obstacles = tuple(self.obstacles)
        self.position_dims = tuple(self.position_dims)
        if not self.lam > 0:
            raise CostError(f"lambda must be positive, got {self.lam}")
        for name, table in (("goal_weights", self.goal_weights), ("pair_weights", self.pair_weights),
                            ("alignment_weights", self.alignment_weights)):
            for key, w in table.items():
                if not np.isfinite(w) or w < 0:
                    raise CostError(f"{name}[{key}] must be finite and >= 0, got {w}")
        for name, table in (("goal_regularizers", self.goal_regularizers),
                            ("pair_regularizers", self.pair_regularizers)):
            for key, d in table.items():
                if not np.isfinite(d) or d < 0:
                    raise CostError(f"{name}[{key}] must be finite and >= 0, got {d}")
        if self.obstacles and len(self.position_dims) != 2:
            raise CostError("obstacles need planar positions")
        if self.obstacle_check not in OBSTACLE_CHECKS:
            raise CostError(f"obstacle_check must be one of {OBSTACLE_CHECKS}, got {self.obstacle_check!r}")
        if self.control_weight is not None:
            r = np.atleast_2d(np.asarray(self.control_weight, dtype=float))
            if not np.allclose(r, r.T):
                raise CostError("control weight R must be symmetric")
            try:
                np.linalg.cholesky(r)
            except np.linalg.LinAlgError:
                raise CostError("control weight R must be positive definite")
            self.control_weight = r

    def goal_position(self, agent: int) -> np.ndarray:
        return self.goals[agent - 1, list(self.position_dims)]


def _positions(spec: CostSpec, x: np.ndarray) -> np.ndarray:
    return x[..., list(spec.position_dims)]


def unclamped_running_cost(spec: CostSpec, sub: Subsystem, x: np.ndarray) -> np.ndarray:
    """Goal, pair and alignment terms before the obstacle override and the clamp."""
    c = sub.center
    p = _positions(spec, x)
    total = np.zeros(x.shape[:-2])
    w = spec.goal_weights.get(c, 0.0)
    if w:
        dist = np.linalg.norm(p[..., 0, :] - spec.goal_position(c), axis=-1)
        total = total + w * (dist - spec.goal_regularizers.get(c, 0.0))
    act = slice(spec.nonact_dim, None)
    for pos, j in enumerate(sub.members[1:], start=1):
        w = spec.pair_weights.get((c, j), 0.0)
        if w:
            dist = np.linalg.norm(p[..., 0, :] - p[..., pos, :], axis=-1)
            total = total + w * (dist - spec.pair_regularizers.get((c, j), 0.0))
        a = spec.alignment_weights.get((c, j), 0.0)
        if a:
            diff = x[..., 0, act] - x[..., pos, act]
            total = total + a * np.sum(diff * diff, axis=-1)
    return total


def _obstacle_penalty(spec: CostSpec, center_positions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    inside = np.zeros(center_positions.shape[:-1], dtype=bool)
    penalty = np.zeros(center_positions.shape[:-1])
    for obstacle in spec.obstacles:
        hit = obstacle.contains(center_positions)
        penalty = np.where(hit, np.maximum(penalty, obstacle.penalty), penalty)
        inside |= hit
    return inside, penalty


def running_cost_array(spec: CostSpec, sub: Subsystem, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """q_i on member-blocked states of shape (..., n, M); returns shape (...)."""
    total = unclamped_running_cost(spec, sub, x)
    if spec.obstacles:
        inside, penalty = _obstacle_penalty(spec, _positions(spec, x)[..., 0, :])
        total = np.where(inside, penalty, total)
    return np.maximum(total, 0.0)


def running_cost(spec: CostSpec, s: JointState, t: float = 0.0) -> float:
    return float(running_cost_array(spec, s.subsystem, s.blocks(), t))


def path_running_costs(spec: CostSpec, sub: Subsystem, paths: np.ndarray, t0: float = 0.0,
                       eps: float = 1.0) -> np.ndarray:
    """
    q at the first K grid points of paths shaped (..., K+1, n, M); returns (..., K).

    With obstacle_check "segment" step k also pays the obstacle penalty when the
    center's straight move from grid point k to k+1 crosses an obstacle, so
    coarse rollouts cannot jump over one. "point" charges grid points only.
    """
    paths = np.asarray(paths, dtype=float)
    K = paths.shape[-3] - 1
    q = np.stack([running_cost_array(spec, sub, paths[..., k, :, :], t0 + k * eps) for k in range(K)], axis=-1)
    if not spec.obstacles or spec.obstacle_check == "point":
        return q
    center = _positions(spec, paths)[..., 0, :]
    start, end = center[..., :-1, :], center[..., 1:, :]
    crossed = np.zeros(q.shape, dtype=bool)
    penalty = np.zeros(q.shape)
    for obstacle in spec.obstacles:
        hit = obstacle.crosses(start, end)
        penalty = np.where(hit, np.maximum(penalty, obstacle.penalty), penalty)
        crossed |= hit
    return np.where(crossed, penalty, q)


def terminal_cost_array(spec: CostSpec, sub: Subsystem, x: np.ndarray) -> np.ndarray:
    if spec.terminal.kind == "zero":
        return np.zeros(x.shape[:-2])
    goals = np.stack([spec.goal_position(m) for m in sub.members])
    diff = _positions(spec, x) - goals
    return spec.terminal.offset + spec.terminal.kappa * np.sum(diff * diff, axis=(-2, -1))


def terminal_cost(spec: CostSpec, s: JointState) -> float:
    return float(terminal_cost_array(spec, s.subsystem, s.blocks()))


def running_cost_gradient(spec: CostSpec, sub: Subsystem, x: np.ndarray) -> np.ndarray:
    """
    Analytic gradient of q_i with respect to the member-blocked state x (n, M).

    Zero inside an obstacle and wherever the clamp is active. At coincident
    points the distance terms contribute zero.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    p = _positions(spec, x)
    if spec.obstacles:
        inside, _ = _obstacle_penalty(spec, p[0])
        if inside:
            return grad
    if unclamped_running_cost(spec, sub, x) < 0:
        return grad
    c = sub.center
    dims = list(spec.position_dims)

    def unit(v):
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else np.zeros_like(v)

    w = spec.goal_weights.get(c, 0.0)
    if w:
        grad[0, dims] += w * unit(p[0] - spec.goal_position(c))
    act = slice(spec.nonact_dim, None)
    for pos, j in enumerate(sub.members[1:], start=1):
        w = spec.pair_weights.get((c, j), 0.0)
        if w:
            g = w * unit(p[0] - p[pos])
            grad[0, dims] += g
            grad[pos, dims] -= g
        a = spec.alignment_weights.get((c, j), 0.0)
        if a:
            g = 2.0 * a * (x[0, act] - x[pos, act])
            grad[0, act] += g
            grad[pos, act] -= g
    return grad


def finite_difference_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                               step: Optional[float] = None) -> np.ndarray:
    """Central differences with step 1e-5 * max(1, |x|) unless given."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-5 * max(1.0, float(np.linalg.norm(x)))
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = step
        e = e.reshape(x.shape)
        flat[k] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return grad
