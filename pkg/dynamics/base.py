"""
Single-agent controlled SDEs dx = (f(x,t) + B(x)u) dt + B(x) sigma dw and their
stacking over the members of a factorial subsystem.

State vectors are split into U non-directly actuated rows followed by D directly
actuated rows; B(x) is zero on the first U rows. Every function that takes a
state array accepts arbitrary leading batch axes, so the same code integrates a
single joint state, a batch of rollouts, or the whole world.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import block_diag

from network import Subsystem

logger = logging.getLogger(__name__)

DriftFn = Callable[[np.ndarray, float], np.ndarray]
ControlMatrixFn = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Raised when a step produces a non-finite state."""


class DimensionError(ValueError):
    """Raised for inconsistent state, input or member counts."""


def _check_psd(name: str, matrix: np.ndarray, size: int) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape != (size, size):
        raise DimensionError(f"{name} must be {size}x{size}, got {matrix.shape}")
    if not np.allclose(matrix, matrix.T):
        raise DimensionError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(matrix)) < -1e-12:
        raise DimensionError(f"{name} must be positive semi-definite")
    return matrix


@dataclass(frozen=True, eq=False)
class AgentModel:
    """
    Passive drift f, control matrix B and the two noise scales of one agent.

    `noise_scale` drives the executed world, `sampling_noise_scale` drives the
    exploration rollouts and the path-integral weights.
    """
    name: str
    state_dim: int
    input_dim: int
    nonact_dim: int
    drift: DriftFn
    control_matrix: ControlMatrixFn
    noise_scale: np.ndarray
    sampling_noise_scale: np.ndarray
    constant_control_matrix: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.nonact_dim < self.state_dim:
            raise DimensionError(
                f"nonact_dim must be in [0, {self.state_dim}), got {self.nonact_dim}")
        object.__setattr__(self, "noise_scale", _check_psd("noise_scale", self.noise_scale, self.input_dim))
        object.__setattr__(self, "sampling_noise_scale",
                           _check_psd("sampling_noise_scale", self.sampling_noise_scale, self.input_dim))
        b = np.asarray(self.control_matrix(np.zeros(self.state_dim)), dtype=float)
        if b.shape != (self.state_dim, self.input_dim):
            raise DimensionError(f"control matrix must be {self.state_dim}x{self.input_dim}, got {b.shape}")
        if np.any(b[:self.nonact_dim]):
            raise DimensionError(f"control matrix must be zero on the first {self.nonact_dim} rows")

    @property
    def act_dim(self) -> int:
        return self.state_dim - self.nonact_dim

    def noise(self, kind: str) -> np.ndarray:
        if kind == "model":
            return self.noise_scale
        if kind == "sampling":
            return self.sampling_noise_scale
        raise ValueError(f"unknown noise selector {kind!r} (expected 'model' or 'sampling')")

    def actuated_control_matrix(self, x: np.ndarray) -> np.ndarray:
        """B_(d)(x): the D x P lower block of B(x), batched over leading axes."""
        return self.control_matrix(x)[..., self.nonact_dim:, :]


ModelsArg = Union[AgentModel, Sequence[AgentModel]]


def shared_model(models: ModelsArg, n_members: int) -> AgentModel:
    """
    Resolve per-member models to the single model the subsystem shares.
    Agents are homogeneous, so a sequence must hold one model n_members times.
    """
    if isinstance(models, AgentModel):
        return models
    models = list(models)
    if len(models) != n_members:
        raise DimensionError(f"expected {n_members} member models, got {len(models)}")
    first = models[0]
    for m in models[1:]:
        same = (m is first) or (
            m.name == first.name and m.state_dim == first.state_dim and m.input_dim == first.input_dim
            and m.params == first.params)
        if not same:
            raise DimensionError("agents of one scenario must share a single AgentModel")
    return first


@dataclass(frozen=True, eq=False)
class JointState:
    """Stacked states of the members of a subsystem, in member order."""
    subsystem: Subsystem
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size == 0 or values.size % self.subsystem.size:
            raise DimensionError(
                f"joint state of length {values.size} does not split into {self.subsystem.size} blocks")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_world(cls, sub: Subsystem, world: np.ndarray) -> "JointState":
        """Collect member states from a world array of shape (N, M), agent i at row i-1."""
        world = np.asarray(world, dtype=float)
        return cls(sub, world[[m - 1 for m in sub.members]].reshape(-1))

    @property
    def state_dim(self) -> int:
        return self.values.size // self.subsystem.size

    def blocks(self) -> np.ndarray:
        return self.values.reshape(self.subsystem.size, self.state_dim)

    def block(self, position: int) -> np.ndarray:
        return self.blocks()[position]

    def agent_state(self, agent: int) -> np.ndarray:
        return self.block(self.subsystem.position(agent))

    def with_values(self, values: np.ndarray) -> "JointState":
        return JointState(self.subsystem, values)


def _blocks_for(model: AgentModel, s: JointState) -> np.ndarray:
    if s.state_dim != model.state_dim:
        raise DimensionError(f"joint state has blocks of size {s.state_dim}, model expects {model.state_dim}")
    return s.blocks()


def actuated_slice(model: AgentModel) -> slice:
    return slice(model.nonact_dim, model.state_dim)


def joint_drift(models: ModelsArg, s: JointState, t: float) -> np.ndarray:
    """f̄(x̄, t): member drifts stacked in canonical order."""
    model = shared_model(models, s.subsystem.size)
    return np.asarray(model.drift(_blocks_for(model, s), t)).reshape(-1)


def actuated_drift(models: ModelsArg, s: JointState, t: float) -> np.ndarray:
    """f̄_(d): the directly actuated rows of every member block."""
    model = shared_model(models, s.subsystem.size)
    return np.asarray(model.drift(_blocks_for(model, s), t))[:, actuated_slice(model)].reshape(-1)


def joint_control_matrix(models: ModelsArg, s: JointState) -> np.ndarray:
    """B̄(x̄) = diag{B_j(x_j)}, shape (M n, P n)."""
    model = shared_model(models, s.subsystem.size)
    return block_diag(*model.control_matrix(_blocks_for(model, s)))


def actuated_control_matrix(models: ModelsArg, s: JointState) -> np.ndarray:
    """B̄_(d)(x̄), shape (D n, P n)."""
    model = shared_model(models, s.subsystem.size)
    return block_diag(*model.actuated_control_matrix(_blocks_for(model, s)))


def joint_noise_matrix(models: ModelsArg, n_members: int, noise: str = "sampling") -> np.ndarray:
    model = shared_model(models, n_members)
    return block_diag(*[model.noise(noise)] * n_members)


def step_states(
    model: AgentModel,
    x: np.ndarray,
    t: float,
    eps: float,
    xi: np.ndarray,
    sigma: np.ndarray,
    u: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    One Euler-Maruyama step for agent states x of shape (..., M).

    x' = x + (f + B u) eps + B sigma sqrt(eps) xi, with xi of shape (..., P).
    """
    if eps <= 0:
        raise ValueError(f"step length must be positive, got {eps}")
    f = model.drift(x, t)
    b = model.control_matrix(x)
    drive = sigma @ xi[..., None] * np.sqrt(eps)
    if u is not None:
        drive = drive + u[..., None] * eps
    x_next = x + f * eps + (b @ drive)[..., 0]
    if not np.all(np.isfinite(x_next)):
        raise IntegrationError(f"non-finite state after Euler-Maruyama step at t={t:.4f}")
    return x_next


def euler_maruyama_step(
    models: ModelsArg,
    s: JointState,
    u: Optional[np.ndarray],
    noise: str,
    eps: float,
    rng: np.random.Generator,
    t: float = 0.0,
) -> JointState:
    """Advance a joint state by eps under joint control u (None or zeros for passive dynamics)."""
    model = shared_model(models, s.subsystem.size)
    blocks = _blocks_for(model, s)
    n = s.subsystem.size
    if u is not None:
        u = np.asarray(u, dtype=float)
        if u.size != n * model.input_dim:
            raise DimensionError(f"joint control of length {u.size}, expected {n * model.input_dim}")
        u = u.reshape(n, model.input_dim)
    xi = rng.standard_normal((n, model.input_dim))
    return s.with_values(step_states(model, blocks, t, eps, xi, model.noise(noise), u).reshape(-1))
