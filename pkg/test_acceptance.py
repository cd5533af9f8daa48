import numpy as np
import pytest

from runner import run_trials, time_averaged_distance
from scenario_io import load_scenario

"""End-to-end flight scenarios. Each takes minutes; run with --runslow."""

TRIALS = 20
WORKERS = 4


def flown(name):
    scenario = load_scenario(name)
    results = run_trials(scenario, TRIALS, scenario.seed, max_workers=WORKERS, progress=False)
    assert all(r.ok for r in results), [r.error for r in results if not r.ok]
    return scenario, results


def assert_goals_reached(scenario, results, agents=None):
    dims = scenario.costs.position_dims
    goals = scenario.goal_positions
    start = np.linalg.norm(scenario.initial_states[:, list(dims)] - goals, axis=-1)
    final = np.mean([r.goal_errors(goals, dims)[-1] for r in results], axis=0)
    for agent in agents or range(1, scenario.graph.n_agents + 1):
        assert final[agent - 1] < 0.2 * start[agent - 1], f"agent {agent}: {final[agent - 1]:.2f}"


def planning_time_per_agent(results):
    return float(np.mean([d.wall_time for r in results for d in r.diagnostics]))


@pytest.mark.slow
def test_joint_costs_keep_outer_uavs_together():
    joint_scenario, joint = flown("fig3_joint")
    _, independent = flown("fig3_independent")
    joint_mean, joint_se, _ = time_averaged_distance(joint, 1, 3)
    ind_mean, ind_se, _ = time_averaged_distance(independent, 1, 3)
    assert ind_mean - joint_mean > joint_se + ind_se
    assert_goals_reached(joint_scenario, joint)


@pytest.mark.slow
def test_obstacles_are_avoided():
    scenario, results = flown("fig5_obstacles")
    inside = 0
    steps = 0
    for r in results:
        positions = r.states[:, :, :2]
        hit = np.zeros(positions.shape[:2], dtype=bool)
        for obstacle in scenario.costs.obstacles:
            hit |= obstacle.contains(positions)
        inside += int(np.any(hit, axis=1).sum())
        steps += positions.shape[0]
    assert inside / steps < 0.02


@pytest.mark.slow
def test_nine_agents_on_a_line():
    scenario, results = flown("fig6_nine_agents")
    assert_goals_reached(scenario, results)
    _, three = flown("fig3_joint")
    assert planning_time_per_agent(results) <= 2.0 * planning_time_per_agent(three)
