"""
Independent references for the path-integral estimator.

Two estimators of the desirability Z = E[exp(-phi/lam - (1/lam) int q dt)]
under the passive dynamics, the closed-form 1-D linear-quadratic solution,
and a finite-difference check of the analytic running-cost gradient.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from costs import (
    CostSpec,
    finite_difference_gradient,
    path_running_costs,
    running_cost_array,
    running_cost_gradient,
    terminal_cost_array,
    unclamped_running_cost,
)
from dynamics import AgentModel, JointState, step_states
from network import Subsystem
from sampler import RolloutBatch

logger = logging.getLogger(__name__)

SUBSTEPS_PER_SEGMENT = 20


@dataclass(frozen=True)
class DesirabilityEstimate:
    value: float
    std_error: float
    samples: int

    def agrees_with(self, other: "DesirabilityEstimate", n_se: float = 3.0) -> bool:
        return abs(self.value - other.value) <= n_se * (self.std_error + other.std_error)


@dataclass(frozen=True, eq=False)
class OracleSystem:
    """A subsystem with its model and costs; shared by both desirability estimators."""
    model: AgentModel
    costs: CostSpec
    subsystem: Subsystem

    @property
    def lam(self) -> float:
        return self.costs.lam


def _estimate(values: np.ndarray) -> DesirabilityEstimate:
    n = values.size
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return DesirabilityEstimate(float(np.mean(values)), se, n)


def desirability_direct_mc(
    system: OracleSystem,
    x0: JointState,
    t: float,
    t_f: float,
    samples: int,
    rng: np.random.Generator,
    step: Optional[float] = None,
) -> DesirabilityEstimate:
    """
    Simulate the passive diffusion on a fine grid (step / 20, or 1/1000 of the
    horizon when no step is given) and average exp(-phi/lam - sum q h / lam).
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    horizon = t_f - t
    if horizon <= 0:
        raise ValueError(f"need t < t_f, got t={t}, t_f={t_f}")
    h = step / SUBSTEPS_PER_SEGMENT if step else horizon / 1000.0
    n_sub = max(1, int(round(horizon / h)))
    h = horizon / n_sub
    model, lam = system.model, system.lam
    x = np.broadcast_to(x0.blocks(), (samples,) + x0.blocks().shape).copy()
    integral = np.zeros(samples)
    for k in range(n_sub):
        tk = t + k * h
        xi = rng.standard_normal(x.shape[:-1] + (model.input_dim,))
        x_next = step_states(model, x, tk, h, xi, model.sampling_noise_scale)
        pair = np.stack([x, x_next], axis=-3)
        integral += path_running_costs(system.costs, system.subsystem, pair, tk, h)[..., 0] * h
        x = x_next
    phi = terminal_cost_array(system.costs, system.subsystem, x)
    return _estimate(np.exp(-phi / lam - integral / lam))


def desirability_discretized(system: OracleSystem, batch: RolloutBatch,
                             lam: Optional[float] = None) -> DesirabilityEstimate:
    """Sample mean of exp(-phi/lam - (eps/lam) sum q) over passive rollouts."""
    lam = system.lam if lam is None else lam
    x = batch.paths
    q = path_running_costs(system.costs, batch.subsystem, x, batch.t0, batch.eps).sum(axis=-1)
    phi = terminal_cost_array(system.costs, batch.subsystem, x[:, batch.K])
    return _estimate(np.exp(-phi / lam - batch.eps * q / lam))


def lq1d_desirability(a: float, sigma: float, lam: float, x: float, t: float, t_f: float) -> float:
    """
    Z for dx = u dt + sigma dw, q = 0, phi = a x^2 / 2, with R = lam / sigma^2:

        Z = (1 + a sigma^2 T / lam)^(-1/2) exp(-a x^2 / (2 (lam + a sigma^2 T))),  T = t_f - t.
    """
    remaining = t_f - t
    s2 = sigma * sigma * remaining
    return float((1.0 + a * s2 / lam) ** -0.5 * np.exp(-a * x * x / (2.0 * (lam + a * s2))))


def lq1d_optimal_control(a: float, sigma: float, lam: float, x: float, t: float, t_f: float) -> float:
    """u* = sigma^2 d/dx log Z = -sigma^2 a x / (lam + a sigma^2 (t_f - t))."""
    return float(-sigma * sigma * a * x / (lam + a * sigma * sigma * (t_f - t)))


def lq1d_control_from_desirability(a: float, sigma: float, lam: float, x: float, t: float, t_f: float,
                                   step: float = 1e-5) -> float:
    """The same control by central differences of log Z."""
    up = np.log(lq1d_desirability(a, sigma, lam, x + step, t, t_f))
    down = np.log(lq1d_desirability(a, sigma, lam, x - step, t, t_f))
    return float(sigma * sigma * (up - down) / (2.0 * step))


@dataclass
class GradientReport:
    checked: int = 0
    excluded: int = 0
    max_rel_error: float = 0.0
    failures: List[dict] = field(default_factory=list)
    tolerance: float = 1e-5

    @property
    def passed(self) -> bool:
        return self.checked > 0 and not self.failures

    def to_dict(self) -> dict:
        return {"checked": self.checked, "excluded": self.excluded, "max_rel_error": self.max_rel_error,
                "tolerance": self.tolerance, "failures": self.failures}


def _near_kink(spec: CostSpec, sub: Subsystem, x: np.ndarray, margin: float) -> bool:
    p = x[:, list(spec.position_dims)]
    for pos in range(1, sub.size):
        if np.linalg.norm(p[0] - p[pos]) < margin:
            return True
    if np.linalg.norm(p[0] - spec.goal_position(sub.center)) < margin:
        return True
    for o in spec.obstacles:
        gaps = np.abs([p[0, 0] - o.x_min, p[0, 0] - o.x_max, p[0, 1] - o.y_min, p[0, 1] - o.y_max])
        if np.min(gaps) < margin:
            return True
    level = float(unclamped_running_cost(spec, sub, x))
    return 0.0 < abs(level) < margin


def gradient_check(spec: CostSpec, sub: Subsystem, states: np.ndarray,
                   tolerance: float = 1e-5, margin: float = 1e-2) -> GradientReport:
    """
    Compare the analytic gradient of q with central differences at the given
    member-blocked states (S, n, M). States where q is not differentiable
    (coincident points, obstacle edges, the clamp boundary) are skipped and
    counted as excluded.
    """
    report = GradientReport(tolerance=tolerance)

    def q(x):
        return float(running_cost_array(spec, sub, x))

    for idx, x in enumerate(np.asarray(states, dtype=float)):
        if _near_kink(spec, sub, x, margin):
            report.excluded += 1
            continue
        analytic = running_cost_gradient(spec, sub, x)
        numeric = finite_difference_gradient(q, x)
        err = float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1.0))
        report.checked += 1
        report.max_rel_error = max(report.max_rel_error, err)
        if err > tolerance:
            report.failures.append({"index": idx, "rel_error": err, "state": x.tolist()})
    if report.excluded:
        logger.info(f"Gradient check skipped {report.excluded} non-differentiable states")
    return report


def random_states(spec: CostSpec, sub: Subsystem, state_dim: int, count: int,
                  rng: np.random.Generator, spread: float = 20.0) -> np.ndarray:
    """States scattered around the members' goals; non-position coordinates in [-1, 1]."""
    dims = list(spec.position_dims)
    states = rng.uniform(-1.0, 1.0, size=(count, sub.size, state_dim))
    for pos, agent in enumerate(sub.members):
        states[:, pos, dims] = spec.goal_position(agent) + rng.uniform(-spread, spread, size=(count, len(dims)))
    return states
