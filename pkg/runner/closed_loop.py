"""
Receding-horizon execution of cooperative path-integral control.

Every control cycle all agents read the same world snapshot, sample local
passive paths, assemble their subsystem batches, estimate the joint control
and keep their own block. The world then advances one control period with all
local controls applied at once under the model noise.
"""

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from dynamics import IntegrationError, JointState, step_states
from network import Subsystem
from pic import ScoringError, estimate_from_batch
from sampler import (
    AgentPaths,
    assemble_joint_batch,
    derive_seed,
    dump_batch,
    make_rng,
    sample_agent_paths,
    sample_joint_paths,
)

logger = logging.getLogger(__name__)

# Guards floor/ceil against representation error, e.g. 1.0 / 0.2 = 4.999...
_ROUNDING_SLACK = 1e-9


def schedule_eps(t: float, t_f: float, K: int, delta: float) -> Tuple[float, int]:
    """
    Rollout step for the remaining horizon: eps = (t_f - t) / K, but never
    shorter than the control period. When clamped, K shrinks to the number of
    whole control periods left (at least one).
    """
    remaining = t_f - t
    if remaining <= 0:
        raise ValueError(f"no horizon left: t={t} >= t_f={t_f}")
    if K < 1 or delta <= 0:
        raise ValueError("need K >= 1 and a positive control period")
    eps = remaining / K
    if eps < delta - _ROUNDING_SLACK:
        return delta, max(1, int(math.floor(remaining / delta + _ROUNDING_SLACK)))
    return eps, K


@dataclass(frozen=True)
class CycleSchedule:
    control_period: float
    horizon_segments: int
    t_f: float
    t_start: float = 0.0

    def __post_init__(self):
        if self.horizon_segments < 1:
            raise ValueError("horizon_segments must be at least 1")
        if not self.control_period > 0 or self.t_f - self.t_start < self.control_period - _ROUNDING_SLACK:
            raise ValueError("need a positive control period no longer than the horizon")

    @property
    def max_cycles(self) -> int:
        return int(math.ceil((self.t_f - self.t_start) / self.control_period - _ROUNDING_SLACK))

    def time_of(self, cycle: int) -> float:
        return self.t_start + cycle * self.control_period

    def eps_at(self, t: float) -> Tuple[float, int]:
        return schedule_eps(t, self.t_f, self.horizon_segments, self.control_period)


@dataclass(frozen=True, eq=False)
class WorldState:
    cycle: int
    t: float
    states: np.ndarray


@dataclass
class CycleDiagnostics:
    trial: int
    cycle: int
    t: float
    agent: int
    eps: float
    K: int
    min_s_tilde: float
    mean_s_tilde: float
    ess: float
    u_norm: float
    degenerate: bool
    wall_time: float


@dataclass(eq=False)
class CycleOutcome:
    controls: np.ndarray
    diagnostics: List[CycleDiagnostics]
    world: WorldState


@dataclass(eq=False)
class TrialResult:
    """Executed trajectories on the uniform control-period grid, plus per-cycle diagnostics."""
    trial: int
    seed: int
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    diagnostics: List[CycleDiagnostics] = field(default_factory=list)
    status: str = "success"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "success"

    @property
    def n_cycles(self) -> int:
        return self.controls.shape[0]

    def pair_distance(self, i: int, j: int, position_dims=(0, 1)) -> np.ndarray:
        dims = list(position_dims)
        return np.linalg.norm(self.states[:, i - 1, dims] - self.states[:, j - 1, dims], axis=-1)

    def goal_errors(self, goal_positions: np.ndarray, position_dims=(0, 1)) -> np.ndarray:
        """Distance of every agent to its goal over time, shape (T, N)."""
        return np.linalg.norm(self.states[..., list(position_dims)] - goal_positions, axis=-1)


def _sample_local_paths(scenario, world: WorldState, trial_seed: int, eps: float, K: int) -> Dict[int, AgentPaths]:
    paths = {}
    for agent in range(1, scenario.graph.n_agents + 1):
        rng = make_rng(trial_seed, "cycle", world.cycle, "agent", agent)
        paths[agent] = sample_agent_paths(scenario.model, world.states[agent - 1], K, eps,
                                          scenario.rollouts, rng, t0=world.t, agent=agent)
    return paths


def _plan_agent(scenario, sub: Subsystem, world: WorldState, trial_seed: int, trial: int,
                eps: float, K: int, local_paths: Optional[Dict[int, AgentPaths]]):
    started = time.perf_counter()
    seed_record = (trial_seed, world.cycle, sub.center)
    if local_paths is None:
        rng = make_rng(trial_seed, "cycle", world.cycle, "joint", sub.center)
        x0 = JointState.from_world(sub, world.states)
        batch = sample_joint_paths(scenario.model, x0, K, eps, scenario.rollouts, rng,
                                   t0=world.t, seed_record=seed_record)
    else:
        batch = assemble_joint_batch(sub, local_paths, seed_record=seed_record)
    if scenario.dump_dir:
        dump_batch(batch, os.path.join(scenario.dump_dir,
                                       f"trial{trial:03d}_cycle{world.cycle:04d}_agent{sub.center}.npz"))
    estimate, scores = estimate_from_batch(scenario.costs, scenario.model, batch, scenario.scoring)
    diag = CycleDiagnostics(
        trial=trial,
        cycle=world.cycle,
        t=world.t,
        agent=sub.center,
        eps=eps,
        K=K,
        min_s_tilde=float(scores.s_tilde.min()),
        mean_s_tilde=float(scores.s_tilde.mean()),
        ess=estimate.ess,
        u_norm=float(np.linalg.norm(estimate.joint)),
        degenerate=estimate.degenerate,
        wall_time=time.perf_counter() - started,
    )
    return estimate.local, diag


def run_cycle(scenario, world: WorldState, trial_seed: int, trial: int = 0,
              executor: Optional[ThreadPoolExecutor] = None) -> CycleOutcome:
    """One synchronous control cycle for all agents, then one world step of length Δ."""
    eps, K = scenario.schedule.eps_at(world.t)
    logger.debug(f"Cycle {world.cycle} at t={world.t:.3f}: eps={eps:.4f}, K={K}")
    subsystems = scenario.subsystems
    local_paths = None
    sampling_started = time.perf_counter()
    if scenario.sampling_mode == "distributed":
        local_paths = _sample_local_paths(scenario, world, trial_seed, eps, K)
    sampling_share = (time.perf_counter() - sampling_started) / len(subsystems)

    def plan(sub):
        return _plan_agent(scenario, sub, world, trial_seed, trial, eps, K, local_paths)

    if executor is not None:
        planned = list(executor.map(plan, subsystems))
    else:
        planned = [plan(sub) for sub in subsystems]

    controls = np.stack([local for local, _ in planned])
    diagnostics = [diag for _, diag in planned]
    for diag in diagnostics:
        diag.wall_time += sampling_share

    delta = scenario.schedule.control_period
    rng = make_rng(trial_seed, "cycle", world.cycle, "world")
    xi = rng.standard_normal(controls.shape)
    next_states = step_states(scenario.model, world.states, world.t, delta, xi,
                              scenario.model.noise_scale, u=controls)
    next_world = WorldState(world.cycle + 1, scenario.schedule.time_of(world.cycle + 1), next_states)
    return CycleOutcome(controls, diagnostics, next_world)


def run_trial(scenario, seed: int, trial: int = 0, executor: Optional[ThreadPoolExecutor] = None) -> TrialResult:
    """
    Run cycles until t >= t_f or every agent is inside its goal ball.
    Sampling and scoring failures end the trial with status 'failed'.
    """
    world = WorldState(0, scenario.schedule.t_start, np.array(scenario.initial_states, dtype=float))
    times = [world.t]
    states = [world.states]
    controls = []
    diagnostics: List[CycleDiagnostics] = []
    goal_positions = scenario.goal_positions
    status, error = "success", ""
    dims = list(scenario.costs.position_dims)
    try:
        while not scenario.exit_set.exited(world.t, world.states[:, dims], goal_positions):
            if world.cycle >= scenario.schedule.max_cycles:
                break
            outcome = run_cycle(scenario, world, seed, trial, executor)
            world = outcome.world
            controls.append(outcome.controls)
            diagnostics.extend(outcome.diagnostics)
            times.append(world.t)
            states.append(world.states)
    except (IntegrationError, ScoringError, np.linalg.LinAlgError) as e:
        status, error = "failed", str(e)
        logger.warning(f"Trial {trial} (seed {seed}) failed at t={world.t:.2f}: {e}")

    n_inputs = scenario.model.input_dim
    result = TrialResult(
        trial=trial,
        seed=seed,
        times=np.array(times),
        states=np.stack(states),
        controls=np.stack(controls) if controls else np.zeros((0, scenario.graph.n_agents, n_inputs)),
        diagnostics=diagnostics,
        status=status,
        error=error,
    )
    degenerate = sum(1 for d in diagnostics if d.degenerate)
    if degenerate:
        logger.warning(f"Trial {trial}: {degenerate}/{len(diagnostics)} plans had ESS below "
                    f"5% of {scenario.rollouts} rollouts")
    return result


def trial_seeds(base_seed: int, n: int) -> List[int]:
    return [derive_seed(base_seed, "trial", k) for k in range(n)]


def _trial_with_agent_pool(scenario, seed: int, trial: int, agent_workers: int) -> TrialResult:
    if agent_workers <= 1:
        return run_trial(scenario, seed, trial)
    with ThreadPoolExecutor(max_workers=agent_workers) as agents:
        return run_trial(scenario, seed, trial, agents)


def run_trials(scenario, n: int, base_seed: int, max_workers: int = 1, progress: bool = True,
               agent_workers: int = 1) -> List[TrialResult]:
    """
    Independent trials with derived seeds; results come back in trial order.
    max_workers trials run at once; inside a trial, agent_workers threads plan
    the subsystems of one cycle.
    """
    seeds = trial_seeds(base_seed, n)
    logger.info(f"Running {n} trial(s) of scenario '{scenario.name}' with base seed {base_seed}")
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_trial_with_agent_pool, scenario, seed, k, agent_workers)
                       for k, seed in enumerate(seeds)]
            results = [f.result() for f in tqdm(futures, desc="Trials", disable=not progress)]
    else:
        results = [_trial_with_agent_pool(scenario, seed, k, agent_workers)
                   for k, seed in tqdm(list(enumerate(seeds)), desc="Trials", disable=not progress)]
    failed = [r.trial for r in results if not r.ok]
    if failed:
        logger.warning(f"{len(failed)} of {n} trials failed: {failed}")
    return results
