"""
Monte-Carlo path-integral estimate of the joint optimal control of a subsystem.

For a rollout with step eps and segments k = 0..K-1:

    alpha_k = (x_(d)^(k+1) - x_(d)^(k)) / eps - f_(d)(x^(k), t_k)
    H_k     = B_(d) sigma_s sigma_s^T B_(d)^T
    S~      = phi/lam + eps/lam sum q + eps/(2 lam) sum |alpha_k|^2_{H_k^-1} + 1/2 sum log|H_k|
    u~      = -(eps/lam) grad_(d) q(x^(0)) + H_0^-1 alpha_0
    u*      = sigma_s sigma_s^T B_(d)^T sum_y p_y u~_y

H is block diagonal (one D x D block per member) because the joint noise is.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from costs import (
    CostSpec,
    finite_difference_gradient,
    path_running_costs,
    running_cost_array,
    running_cost_gradient,
    terminal_cost_array,
)
from dynamics import AgentModel, JointState, actuated_slice, shared_model
from sampler import Rollout, RolloutBatch

logger = logging.getLogger(__name__)

WEIGHTINGS = ("passive", "generalized")
DEGENERATE_ESS_FRACTION = 0.05


class ScoringError(RuntimeError):
    """Raised when a step weight matrix is not positive definite or a path value is not finite."""


@dataclass(frozen=True)
class ScoringOptions:
    """
    weighting: 'passive' forms the path distribution from phi/lam + eps/lam sum q,
        the part of S~ left after the passive transition density the rollouts
        were drawn from; 'generalized' uses the full S~.
    alpha_over_lambda: the alpha term of S~ is scaled by eps/(2 lam) when True,
        by eps/2 when False. Both coincide for lam = 1.
    gradient: 'analytic' or 'finite-difference' for grad q in u~.
    """
    weighting: str = "passive"
    alpha_over_lambda: bool = True
    gradient: str = "analytic"

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if self.gradient not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")


@dataclass(frozen=True, eq=False)
class StepWeights:
    H: np.ndarray
    H_inv: np.ndarray
    logdet: float


@dataclass(frozen=True, eq=False)
class PathScore:
    s_tilde: float
    u_tilde: np.ndarray
    state_cost: float
    density_cost: float

    def weighting_value(self, weighting: str) -> float:
        return self.state_cost if weighting == "passive" else self.s_tilde


@dataclass(frozen=True, eq=False)
class BatchScores:
    """Per-rollout scores of a batch; u_tilde has shape (Y, D n)."""
    s_tilde: np.ndarray
    state_cost: np.ndarray
    density_cost: np.ndarray
    u_tilde: np.ndarray

    def __len__(self) -> int:
        return self.s_tilde.shape[0]

    def __getitem__(self, y: int) -> PathScore:
        return PathScore(float(self.s_tilde[y]), self.u_tilde[y],
                         float(self.state_cost[y]), float(self.density_cost[y]))

    def values(self, weighting: str) -> np.ndarray:
        return self.state_cost if weighting == "passive" else self.s_tilde


@dataclass(frozen=True, eq=False)
class ControlEstimate:
    joint: np.ndarray
    local: np.ndarray
    weights: np.ndarray
    ess: float

    @property
    def degenerate(self) -> bool:
        return self.ess < DEGENERATE_ESS_FRACTION * self.weights.size


def _step_blocks(model: AgentModel, x: np.ndarray) -> np.ndarray:
    """Per-member blocks B_(d) sigma_s sigma_s^T B_(d)^T for states (..., n, M); shape (..., n, D, D)."""
    bd = model.actuated_control_matrix(x)
    cov = model.sampling_noise_scale @ model.sampling_noise_scale.T
    return bd @ cov @ np.swapaxes(bd, -1, -2)


def _factor_blocks(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise ScoringError("step weight matrix H is not positive definite; "
                           "check that the sampling noise excites every actuated channel")
    sign, logdet = np.linalg.slogdet(h)
    return np.linalg.inv(h), logdet


def step_weight_matrix(models, s: JointState) -> StepWeights:
    """H = B̄_(d) σ̄_s σ̄_sᵀ B̄_(d)ᵀ at joint state s, with H^-1 and log|H|."""
    model = shared_model(models, s.subsystem.size)
    blocks = _step_blocks(model, s.blocks())
    inv, logdet = _factor_blocks(blocks)
    return StepWeights(block_diag(*blocks), block_diag(*inv), float(np.sum(logdet)))


def _q_gradient(spec: CostSpec, model: AgentModel, batch: RolloutBatch, mode: str) -> np.ndarray:
    x0 = batch.paths[0, 0]
    act = actuated_slice(model)
    if mode == "analytic":
        return running_cost_gradient(spec, batch.subsystem, x0)[:, act].reshape(-1)

    def q_of_actuated(xd):
        x = x0.copy()
        x[:, act] = xd.reshape(x0.shape[0], -1)
        return float(running_cost_array(spec, batch.subsystem, x, batch.t0))

    return finite_difference_gradient(q_of_actuated, x0[:, act].reshape(-1))


def score_batch(spec: CostSpec, models, batch: RolloutBatch,
                options: Optional[ScoringOptions] = None) -> BatchScores:
    """Generalized path values and initial control vectors for every rollout of a batch."""
    options = options or ScoringOptions()
    n = batch.subsystem.size
    model = shared_model(models, n)
    x = batch.paths
    eps, lam, K = batch.eps, spec.lam, batch.K
    act = actuated_slice(model)

    q = path_running_costs(spec, batch.subsystem, x, batch.t0, eps)
    phi = terminal_cost_array(spec, batch.subsystem, x[:, K])
    drift = np.stack([model.drift(x[:, k], batch.t0 + k * eps) for k in range(K)], axis=1)
    alpha = (x[:, 1:, :, act] - x[:, :-1, :, act]) / eps - drift[..., act]

    if model.constant_control_matrix:
        h = _step_blocks(model, x[0, 0])
    else:
        h = _step_blocks(model, x[:, :K])
    if not np.any(h):
        # noise-free sampling: every rollout follows the drift and the estimate is zero
        h_inv, logdet = np.zeros_like(h), np.zeros(h.shape[:-2])
    else:
        h_inv, logdet = _factor_blocks(h)
    h_inv = np.broadcast_to(h_inv, alpha.shape[:-1] + h_inv.shape[-2:])
    logdet_total = np.broadcast_to(logdet, alpha.shape[:-1]).sum(axis=(1, 2))
    quad = np.einsum("ykni,ykni->y", alpha, np.einsum("yknij,yknj->ykni", h_inv, alpha))

    state_cost = phi / lam + (eps / lam) * q.sum(axis=1)
    alpha_scale = eps / (2.0 * lam) if options.alpha_over_lambda else eps / 2.0
    density_cost = alpha_scale * quad + 0.5 * logdet_total
    s_tilde = state_cost + density_cost
    if not np.all(np.isfinite(s_tilde)):
        raise ScoringError("non-finite generalized path value")

    grad = _q_gradient(spec, model, batch, options.gradient)
    push = np.einsum("ynij,ynj->yni", h_inv[:, 0], alpha[:, 0]).reshape(len(batch), -1)
    u_tilde = push - (eps / lam) * grad
    return BatchScores(s_tilde, state_cost, density_cost, u_tilde)


def path_value(spec: CostSpec, models, r: Rollout, options: Optional[ScoringOptions] = None) -> float:
    return float(score_batch(spec, models, RolloutBatch.from_rollouts([r]), options).s_tilde[0])


def initial_control(spec: CostSpec, models, r: Rollout, options: Optional[ScoringOptions] = None) -> np.ndarray:
    return score_batch(spec, models, RolloutBatch.from_rollouts([r]), options).u_tilde[0]


def path_distribution(values: Sequence[float]) -> Tuple[np.ndarray, float]:
    """
    Softmax of -values after subtracting the minimum.

    Returns the probabilities and the effective sample size 1 / sum p^2.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size < 1:
        raise ValueError("need at least one path value")
    if np.any(np.isnan(values)):
        raise ScoringError("NaN path value")
    if not np.all(np.isfinite(values)):
        raise ScoringError("infinite path value")
    w = np.exp(-(values - values.min()))
    probs = w / w.sum()
    return probs, float(1.0 / np.sum(probs * probs))


def estimate_control(
    models,
    batch: RolloutBatch,
    scores: Union[BatchScores, Sequence[PathScore]],
    probs: np.ndarray,
) -> ControlEstimate:
    """ū* = σ̄_s σ̄_sᵀ B̄_(d)ᵀ Σ_y p_y ũ_y; the local control is the center's block."""
    n = batch.subsystem.size
    model = shared_model(models, n)
    if isinstance(scores, BatchScores):
        u_tilde = scores.u_tilde
    else:
        u_tilde = np.stack([s.u_tilde for s in scores])
    probs = np.asarray(probs, dtype=float)
    mean_u = (probs @ u_tilde).reshape(n, model.act_dim)
    bd = model.actuated_control_matrix(batch.paths[0, 0])
    cov = model.sampling_noise_scale @ model.sampling_noise_scale.T
    joint = (cov @ np.swapaxes(bd, -1, -2) @ mean_u[..., None])[..., 0].reshape(-1)
    ess = float(1.0 / np.sum(probs * probs))
    return ControlEstimate(joint=joint, local=joint[:model.input_dim].copy(), weights=probs, ess=ess)


def estimate_from_batch(spec: CostSpec, models, batch: RolloutBatch,
                        options: Optional[ScoringOptions] = None) -> Tuple[ControlEstimate, BatchScores]:
    """Score a batch, form the path distribution and estimate the joint control in one call."""
    options = options or ScoringOptions()
    scores = score_batch(spec, models, batch, options)
    probs, _ = path_distribution(scores.values(options.weighting))
    return estimate_control(models, batch, scores, probs), scores
