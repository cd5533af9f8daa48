"""
Uncontrolled rollouts for path-integral estimation.

Every agent samples Y passive paths from its own state (zero control, sampling
noise); a subsystem's joint rollouts are assembled by stacking the y-th path of
each member in canonical order. Passive dynamics of different agents are
independent, so the stacked paths are distributed as joint passive paths.
"""

import logging
import os
from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple, Union

import numpy as np

from dynamics import AgentModel, DimensionError, JointState, step_states
from network import Subsystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AgentPaths:
    """Y local passive paths of one agent, shape (Y, K+1, M); index 0 is the start state."""
    agent: int
    paths: np.ndarray
    eps: float
    t0: float = 0.0

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    @property
    def K(self) -> int:
        return self.paths.shape[1] - 1


@dataclass(frozen=True, eq=False)
class Rollout:
    """One joint passive trajectory: start x̄(0) and segments x̄(1)..x̄(K) with step eps."""
    x0: JointState
    segments: np.ndarray
    eps: float
    t0: float = 0.0

    def __post_init__(self):
        segments = np.atleast_2d(np.asarray(self.segments, dtype=float))
        if segments.shape[0] < 1:
            raise DimensionError("a rollout needs at least one segment")
        if segments.shape[1] != self.x0.values.size:
            raise DimensionError("rollout segments do not match the joint state size")
        if not self.eps > 0:
            raise ValueError("rollout step must be positive")
        object.__setattr__(self, "segments", segments)

    @property
    def K(self) -> int:
        return self.segments.shape[0]

    def states(self) -> np.ndarray:
        """All K+1 joint states in member-blocked form, shape (K+1, n, M)."""
        full = np.vstack([self.x0.values, self.segments])
        return full.reshape(self.K + 1, self.x0.subsystem.size, self.x0.state_dim)


@dataclass(frozen=True, eq=False)
class RolloutBatch:
    """Y joint rollouts sharing x̄(0), eps and K; paths has shape (Y, K+1, n, M)."""
    subsystem: Subsystem
    paths: np.ndarray
    eps: float
    t0: float = 0.0
    seed_record: Tuple = ()

    def __post_init__(self):
        if self.paths.ndim != 4 or self.paths.shape[2] != self.subsystem.size:
            raise DimensionError(f"batch paths of shape {self.paths.shape} do not fit the subsystem")
        if self.paths.shape[1] < 2:
            raise DimensionError("a rollout needs at least one segment")

    def __len__(self) -> int:
        return self.paths.shape[0]

    def __getitem__(self, y: int) -> Rollout:
        path = self.paths[y]
        return Rollout(self.x0, path[1:].reshape(self.K, -1), self.eps, self.t0)

    @property
    def K(self) -> int:
        return self.paths.shape[1] - 1

    @property
    def x0(self) -> JointState:
        return JointState(self.subsystem, self.paths[0, 0].reshape(-1))

    @classmethod
    def from_rollouts(cls, rollouts: Sequence[Rollout]) -> "RolloutBatch":
        first = rollouts[0]
        for r in rollouts[1:]:
            if r.K != first.K or r.eps != first.eps or not np.array_equal(r.x0.values, first.x0.values):
                raise DimensionError("rollouts of one batch must share x0, eps and K")
        paths = np.stack([r.states() for r in rollouts])
        return cls(first.x0.subsystem, paths, first.eps, first.t0)


def sample_agent_paths(
    model: AgentModel,
    x0: np.ndarray,
    K: int,
    eps: float,
    count: int,
    rng: np.random.Generator,
    t0: float = 0.0,
    agent: int = 1,
) -> AgentPaths:
    """Y passive Euler-Maruyama paths of one agent under the sampling noise."""
    if count < 1 or K < 1:
        raise ValueError(f"need at least one path and one segment, got Y={count}, K={K}")
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    xi = rng.standard_normal((count, K, model.input_dim))
    paths = np.empty((count, K + 1, model.state_dim))
    paths[:, 0] = x0
    x = paths[:, 0]
    for k in range(K):
        x = step_states(model, x, t0 + k * eps, eps, xi[:, k], model.sampling_noise_scale)
        paths[:, k + 1] = x
    return AgentPaths(agent=agent, paths=paths, eps=eps, t0=t0)


def sample_joint_paths(
    model: AgentModel,
    x0: JointState,
    K: int,
    eps: float,
    count: int,
    rng: np.random.Generator,
    t0: float = 0.0,
    seed_record: Tuple = (),
) -> RolloutBatch:
    """Centralized mode: the center samples the joint passive paths of its whole subsystem."""
    if count < 1 or K < 1:
        raise ValueError(f"need at least one path and one segment, got Y={count}, K={K}")
    n = x0.subsystem.size
    xi = rng.standard_normal((count, K, n, model.input_dim))
    paths = np.empty((count, K + 1, n, model.state_dim))
    paths[:, 0] = x0.blocks()
    x = paths[:, 0]
    for k in range(K):
        x = step_states(model, x, t0 + k * eps, eps, xi[:, k], model.sampling_noise_scale)
        paths[:, k + 1] = x
    return RolloutBatch(x0.subsystem, paths, eps, t0, seed_record)


def assemble_joint_batch(
    sub: Subsystem,
    agent_paths: Union[Mapping[int, AgentPaths], Sequence[AgentPaths]],
    seed_record: Tuple = (),
) -> RolloutBatch:
    """Stack the members' local path sets (received from neighbors) into joint rollouts."""
    if isinstance(agent_paths, Mapping):
        missing = [m for m in sub.members if m not in agent_paths]
        if missing:
            raise DimensionError(f"no local paths received from agents {missing}")
        ordered = [agent_paths[m] for m in sub.members]
    else:
        ordered = list(agent_paths)
        if len(ordered) != sub.size:
            raise DimensionError(f"expected {sub.size} path sets, got {len(ordered)}")
    first = ordered[0]
    for p in ordered[1:]:
        if p.paths.shape != first.paths.shape or p.eps != first.eps or p.t0 != first.t0:
            raise DimensionError(
                f"path sets of agents {first.agent} and {p.agent} differ in count, horizon or step")
    paths = np.stack([p.paths for p in ordered], axis=2)
    return RolloutBatch(sub, paths, first.eps, first.t0, seed_record)


def dump_batch(batch: RolloutBatch, path: str) -> str:
    """Write a batch to a compressed .npz file for offline inspection."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    np.savez_compressed(path, paths=batch.paths, eps=batch.eps, t0=batch.t0,
                        members=np.array(batch.subsystem.members))
    logger.debug(f"Dumped {len(batch)} rollouts of subsystem {batch.subsystem.center} to {path}")
    return path
