import json
import logging
import os

import numpy as np
import pandas as pd
import pytest

import main as cli
from runner import run_trial, run_trials
from scenario_io import (
    ScenarioError,
    apply_override,
    bundled_scenarios,
    load_scenario,
    parse_sweep_param,
    read_scenario_dict,
    run_sweep,
    scenario_from_dict,
    scenario_to_dict,
    write_results,
)
from validation import toy_scenario_dict

"""Tests for scenario loading, overrides, result files and the command line"""


def short_toy(**changes):
    raw = toy_scenario_dict(**changes)
    raw["planning"].update(t_f=0.6, rollouts=12)
    return raw


def write_scenario(tmp_path, raw, name="toy.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"fig3_joint", "fig3_independent", "fig4_pair", "fig5_obstacles", "fig6_nine_agents"} <= set(names)
    for name in names:
        assert load_scenario(name).name == name


def test_joint_scenario_weights():
    scenario = load_scenario("fig3_joint")
    assert scenario.costs.goal_weights == {1: 0.7, 2: 0.9, 3: 0.7}
    assert scenario.costs.pair_weights[(1, 3)] == 1.4
    assert scenario.costs.pair_weights.get((1, 2), 0.0) == 0.0
    assert scenario.graph.n_agents == 3 and scenario.rollouts == 400
    assert scenario.schedule.max_cycles == 90
    assert [s.members for s in scenario.subsystems][0] == (1, 2, 3)


def test_obstacle_scenario_checks_segments():
    scenario = load_scenario("fig5_obstacles")
    assert len(scenario.costs.obstacles) == 3
    assert scenario.costs.obstacle_check == "segment"


def test_pair_weight_without_edge_is_rejected():
    raw = toy_scenario_dict()
    raw["costs"]["pair_weights"]["1-3"] = 0.4
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(raw)
    assert err.value.field == "costs.pair_weights.1-3"


def test_zero_pair_weight_without_edge_is_allowed():
    raw = toy_scenario_dict()
    raw["costs"]["pair_weights"]["1-3"] = 0.0
    assert scenario_from_dict(raw).costs.pair_weights[(1, 3)] == 0.0


def test_missing_lambda_defaults_to_one(caplog):
    raw = toy_scenario_dict()
    del raw["costs"]["lambda"]
    with caplog.at_level(logging.INFO):
        scenario = scenario_from_dict(raw)
    assert scenario.costs.lam == 1.0
    assert "lambda not given" in caplog.text


@pytest.mark.parametrize("change, field", [
    (lambda raw: raw.update(extra=1), "extra"),
    (lambda raw: raw["planning"].update(rollouts=0), "planning.rollouts"),
    (lambda raw: raw["planning"].update(t_f=0.2), "planning.t_f"),
    (lambda raw: raw["model"].update(kind="quadrotor"), "model.kind"),
    (lambda raw: raw["agents"].pop(), "agents"),
    (lambda raw: raw["costs"].update(obstacles=[{"x": [1, 2]}]), "costs.obstacles.0"),
    (lambda raw: raw["costs"].update(obstacle_check="area"), "costs.obstacle_check"),
])
def test_invalid_scenarios(change, field):
    raw = toy_scenario_dict()
    change(raw)
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(raw)
    assert err.value.field == field


def test_unknown_scenario_name():
    with pytest.raises(ScenarioError):
        read_scenario_dict("no_such_scenario")


def test_apply_override_copies():
    raw = toy_scenario_dict()
    updated = apply_override(raw, "costs.pair_weights.1-2", "1.4")
    assert updated["costs"]["pair_weights"]["1-2"] == 1.4
    assert raw["costs"]["pair_weights"]["1-2"] == 0.5
    updated = apply_override(raw, "agents.0.initial", [1.0, 2.0, 0.0, 0.0])
    assert updated["agents"][0]["initial"] == [1.0, 2.0, 0.0, 0.0]
    with pytest.raises(ScenarioError):
        apply_override(raw, "agents.7.goal", [0, 0])


def test_parse_sweep_param():
    assert parse_sweep_param("costs.pair_weights.1-3=0,0.7,1.4") == ("costs.pair_weights.1-3", [0, 0.7, 1.4])
    with pytest.raises(ScenarioError):
        parse_sweep_param("costs.lambda")


def test_echo_reproduces_runs():
    scenario = scenario_from_dict(short_toy())
    echoed = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(scenario))))
    a, b = run_trial(scenario, seed=5), run_trial(echoed, seed=5)
    assert np.array_equal(a.states, b.states)


def test_result_files(tmp_path):
    scenario = scenario_from_dict(short_toy())
    results = run_trials(scenario, 2, base_seed=3, progress=False)
    first, second = tmp_path / "a", tmp_path / "b"
    write_results(results, scenario, str(first))
    write_results(run_trials(scenario, 2, base_seed=3, progress=False), scenario, str(second))

    names = sorted(os.listdir(first))
    assert names == ["diagnostics.csv", "scenario_echo.json", "summary.csv", "trajectories_trial_000.csv",
                     "trajectories_trial_001.csv", "trials.csv"]
    for name in ("trajectories_trial_000.csv", "trajectories_trial_001.csv", "summary.csv", "trials.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    traj = pd.read_csv(first / "trajectories_trial_000.csv")
    assert list(traj.columns) == ["trial", "t", "agent", "x", "y", "v", "phi", "u", "omega"]
    assert len(traj) == 4 * 3 and traj["u"].isna().sum() == 3
    summary = pd.read_csv(first / "summary.csv")
    assert "dist_1_2_mean" in summary.columns
    trials = pd.read_csv(first / "trials.csv", dtype={"seed": str})
    assert list(trials["seed"]) == [str(r.seed) for r in results]
    diagnostics = pd.read_csv(first / "diagnostics.csv")
    assert len(diagnostics) == 2 * 3 * 3


def test_sweep_writes_one_run_per_value(tmp_path):
    raw = short_toy()
    summary = run_sweep(raw, [parse_sweep_param("costs.pair_weights.1-2=0,1.0")], str(tmp_path), trials=1, seed=0)
    assert len(summary) == 2 and (summary["failed"] == 0).all()
    assert "dist_1_2_time_avg_mean" in summary.columns
    assert os.path.isfile(tmp_path / "sweep_summary.csv")
    assert len([d for d in os.listdir(tmp_path) if os.path.isdir(tmp_path / d)]) == 2


def test_sweep_rejects_ragged_values(tmp_path):
    params = [("costs.lambda", [1.0, 2.0]), ("planning.rollouts", [8])]
    with pytest.raises(ScenarioError):
        run_sweep(short_toy(), params, str(tmp_path))


def test_cli_run(tmp_path):
    path = write_scenario(tmp_path, short_toy())
    out = tmp_path / "out"
    assert cli.main(["run", path, "--trials", "1", "--out", str(out)]) == 0
    assert os.path.isfile(out / "trajectories_trial_000.csv")
    pooled = tmp_path / "pooled"
    assert cli.main(["run", path, "--trials", "1", "--agent-workers", "2", "--out", str(pooled)]) == 0
    assert (out / "trajectories_trial_000.csv").read_text() == (pooled / "trajectories_trial_000.csv").read_text()


def test_cli_rejects_invalid_scenario(tmp_path):
    raw = short_toy()
    raw["costs"]["pair_weights"]["1-3"] = 1.0
    path = write_scenario(tmp_path, raw)
    assert cli.main(["run", path, "--out", str(tmp_path / "out")]) == 1
