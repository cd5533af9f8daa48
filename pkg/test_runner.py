import logging

import numpy as np
import pytest

import pic.estimator
import runner.closed_loop as closed_loop
from costs import ExitSet
from pic import ScoringError
from runner import (
    CycleSchedule,
    WorldState,
    run_cycle,
    run_trial,
    run_trials,
    schedule_eps,
    summarize_trials,
    time_averaged_distance,
    trial_seeds,
)
from scenario_io import scenario_from_dict
from validation import toy_scenario_dict

"""Tests for the receding-horizon loop and trial orchestration"""


def toy(**changes):
    raw = toy_scenario_dict(**changes)
    return scenario_from_dict(raw)


def test_schedule_examples():
    assert schedule_eps(0.0, 18.0, 8, 0.2) == (2.25, 8)
    eps, k = schedule_eps(17.0, 18.0, 8, 0.2)
    assert eps == 0.2 and k == 5
    eps, k = schedule_eps(17.8, 18.0, 8, 0.2)
    assert eps == 0.2 and k == 1


def test_schedule_requires_remaining_time():
    with pytest.raises(ValueError):
        schedule_eps(18.0, 18.0, 8, 0.2)


def test_cycle_count():
    assert CycleSchedule(0.2, 8, 18.0).max_cycles == 90
    assert CycleSchedule(0.2, 8, 0.2).max_cycles == 1


def test_one_cycle_when_horizon_is_one_period():
    scenario = toy()
    scenario.schedule = CycleSchedule(0.2, 4, 0.2)
    scenario.exit_set = ExitSet(0.2)
    result = run_trial(scenario, seed=3)
    assert result.ok
    assert result.n_cycles == 1
    assert np.allclose(result.times, [0.0, 0.2])


def test_cycle_diagnostics():
    scenario = toy()
    world = WorldState(0, 0.0, scenario.initial_states.copy())
    outcome = run_cycle(scenario, world, trial_seed=1)
    assert outcome.controls.shape == (3, 2)
    assert [d.agent for d in outcome.diagnostics] == [1, 2, 3]
    for d in outcome.diagnostics:
        assert 1.0 - 1e-9 <= d.ess <= scenario.rollouts + 1e-9
        assert d.eps == pytest.approx(0.25) and d.K == 4
    assert outcome.world.cycle == 1 and outcome.world.t == pytest.approx(0.2)


def test_world_step_uses_model_noise_only():
    raw = toy_scenario_dict()
    raw["model"].update(sigma=0.0, nu=0.0)
    scenario = scenario_from_dict(raw)
    world = WorldState(0, 0.0, scenario.initial_states.copy())
    outcome = run_cycle(scenario, world, trial_seed=4)
    x = scenario.initial_states
    expected = x.copy()
    expected[:, 0] += x[:, 2] * np.cos(x[:, 3]) * 0.2
    expected[:, 1] += x[:, 2] * np.sin(x[:, 3]) * 0.2
    expected[:, 2:] += outcome.controls * 0.2
    assert np.allclose(outcome.world.states, expected)
    assert np.any(outcome.controls)


def test_noise_free_single_agent_drifts():
    scenario = scenario_from_dict(toy_scenario_dict(n_agents=1, noise=False, rollouts=4))
    result = run_trial(scenario, seed=0)
    assert not np.any(result.controls)
    x0 = scenario.initial_states[0]
    assert np.allclose(result.states[-1, 0], [x0[0] + x0[2] * 1.0, x0[1], x0[2], x0[3]])


def test_same_seed_same_trial():
    scenario = toy()
    a, b = run_trial(scenario, seed=9), run_trial(scenario, seed=9)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.controls, b.controls)
    c = run_trial(scenario, seed=10)
    assert not np.array_equal(a.states, c.states)


def test_centralized_sampling_runs():
    raw = toy_scenario_dict()
    raw["planning"]["sampling"] = "centralized"
    result = run_trial(scenario_from_dict(raw), seed=2)
    assert result.ok and result.n_cycles == 5


def test_parallel_trials_match_sequential():
    scenario = toy()
    sequential = run_trials(scenario, 3, base_seed=4, max_workers=1, progress=False)
    parallel = run_trials(scenario, 3, base_seed=4, max_workers=3, progress=False)
    assert [r.seed for r in sequential] == [r.seed for r in parallel]
    for s, p in zip(sequential, parallel):
        assert np.array_equal(s.states, p.states)


def test_agent_pool_matches_sequential():
    scenario = toy()
    sequential = run_trials(scenario, 2, base_seed=6, progress=False)
    pooled = run_trials(scenario, 2, base_seed=6, progress=False, agent_workers=3)
    for s, p in zip(sequential, pooled):
        assert np.array_equal(s.states, p.states)
        assert [d.ess for d in s.diagnostics] == [d.ess for d in p.diagnostics]


def test_degenerate_plans_are_warned(monkeypatch, caplog):
    monkeypatch.setattr(pic.estimator, "DEGENERATE_ESS_FRACTION", 1.1)
    with caplog.at_level(logging.WARNING, logger="runner.closed_loop"):
        result = run_trial(toy(), seed=1)
    assert all(d.degenerate for d in result.diagnostics)
    assert "plans had ESS below" in caplog.text


def test_trial_seeds_are_distinct():
    seeds = trial_seeds(0, 100)
    assert len(set(seeds)) == 100


def test_goal_ball_exit_stops_immediately_at_goal():
    raw = toy_scenario_dict(n_agents=1)
    raw["agents"][0]["goal"] = raw["agents"][0]["initial"][:2]
    raw["run"].update({"exit": "goal-ball", "goal_radius": 0.5})
    result = run_trial(scenario_from_dict(raw), seed=0)
    assert result.n_cycles == 0 and result.states.shape == (1, 1, 4)


def test_scoring_failure_is_recorded(monkeypatch):
    def broken(*args, **kwargs):
        raise ScoringError("non-finite generalized path value")

    monkeypatch.setattr(closed_loop, "estimate_from_batch", broken)
    results = run_trials(toy(), 2, base_seed=0, progress=False)
    assert [r.status for r in results] == ["failed", "failed"]
    assert "non-finite" in results[0].error
    assert results[0].states.shape[0] == 1


def test_summary_columns():
    scenario = toy()
    results = run_trials(scenario, 2, base_seed=1, progress=False)
    summary = summarize_trials(results, scenario.report_pairs, scenario.goal_positions)
    assert {"t", "trials", "dist_1_2_mean", "dist_1_2_std", "goal_err_3_mean"} <= set(summary.columns)
    assert len(summary) == 6 and (summary["trials"] == 2).all()
    expected = np.mean([r.pair_distance(1, 2)[0] for r in results])
    assert summary["dist_1_2_mean"].iloc[0] == pytest.approx(expected)
    mean, se, values = time_averaged_distance(results, 1, 2)
    assert len(values) == 2 and mean == pytest.approx(np.mean(values))
