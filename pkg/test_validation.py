import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costs import CostSpec, Obstacle
from dynamics import JointState
from network import loop_graph, subsystem
from pic import ScoringOptions
from sampler import make_rng, sample_joint_paths
from validation import (
    ValidationReport,
    desirability_direct_mc,
    desirability_discretized,
    gradient_check,
    lq1d_control_from_desirability,
    lq1d_desirability,
    lq1d_optimal_control,
    lq_system,
    random_states,
    run_invariant_suite,
    run_oracle_suite,
    unicycle_pair_system,
)
from validation.suites import LQ_A, LQ_HORIZON, LQ_LAMBDA, LQ_SIGMA, LQ_X, lq_control_estimate

"""Tests for the reference estimators and the validation suites"""


def test_lq_closed_form_values():
    assert lq1d_optimal_control(20.0, 1.0, 1.0, 1.0, 0.0, 0.05) == pytest.approx(-10.0)
    assert lq1d_optimal_control(20.0, 1.0, 1.0, 0.0, 0.0, 0.05) == 0.0
    assert lq1d_desirability(20.0, 1.0, 1.0, 0.0, 1.0, 1.0) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-3.0, 3.0), remaining=st.floats(0.01, 2.0), lam=st.floats(0.5, 3.0))
def test_lq_control_is_log_gradient(x, remaining, lam):
    exact = lq1d_optimal_control(20.0, 1.0, lam, x, 0.0, remaining)
    numeric = lq1d_control_from_desirability(20.0, 1.0, lam, x, 0.0, remaining)
    assert numeric == pytest.approx(exact, rel=1e-5, abs=1e-5)
    assert lq1d_optimal_control(20.0, 1.0, lam, -x, 0.0, remaining) == pytest.approx(-exact)


def test_lq_desirability_grows_toward_terminal_time():
    values = [lq1d_desirability(20.0, 1.0, 1.0, 0.0, t, 1.0) for t in (0.0, 0.5, 0.9)]
    assert values[0] < values[1] < values[2] <= 1.0


def test_direct_estimate_of_lq_desirability():
    system = lq_system()
    x0 = JointState(system.subsystem, [1.0])
    estimate = desirability_direct_mc(system, x0, 0.0, 0.05, 4000, make_rng(0, "test"), 0.01)
    exact = lq1d_desirability(20.0, 1.0, 1.0, 1.0, 0.0, 0.05)
    assert abs(estimate.value - exact) <= 4.0 * estimate.std_error
    assert estimate.samples == 4000


def test_direct_estimate_needs_remaining_time():
    system = lq_system()
    with pytest.raises(ValueError):
        desirability_direct_mc(system, JointState(system.subsystem, [1.0]), 1.0, 1.0, 10, make_rng(0))


def test_unicycle_pair_desirability_in_unit_interval():
    system = unicycle_pair_system()
    x0 = JointState(system.subsystem, [0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.5, 0.0])
    estimate = desirability_direct_mc(system, x0, 0.0, 0.5, 200, make_rng(1), 0.05)
    assert 0.0 < estimate.value < 1.0


def pair_batch(seed=3):
    system = unicycle_pair_system()
    x0 = JointState(system.subsystem, [0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.5, 0.0])
    return sample_joint_paths(system.model, x0, 4, 0.1, 300, make_rng(seed, "pair"))


def test_discretized_desirability_is_one_without_cost():
    estimate = desirability_discretized(unicycle_pair_system(kappa=0.0), pair_batch())
    assert estimate.value == 1.0
    assert estimate.std_error == 0.0


def test_discretized_desirability_falls_as_terminal_cost_rises():
    batch = pair_batch()
    values = [desirability_discretized(unicycle_pair_system(kappa), batch).value for kappa in (0.25, 0.5, 1.0)]
    assert 1.0 > values[0] > values[1] > values[2] > 0.0


def test_lq_control_estimate_across_seeds():
    exact = lq1d_optimal_control(LQ_A, LQ_SIGMA, LQ_LAMBDA, LQ_X, 0.0, LQ_HORIZON)
    assert exact == pytest.approx(-10.0)
    errors = np.array([lq_control_estimate(LQ_LAMBDA, ScoringOptions("passive"), seed) / exact - 1.0
                       for seed in range(20)])
    assert abs(errors.mean()) <= 0.015
    assert np.sum(np.abs(errors) > 0.05) <= 2


def three_uav_spec(**extra):
    goals = np.array([[35.0, 20.0, 0.0, 0.0]] * 3)
    return CostSpec(goals=goals, goal_weights={1: 0.7, 2: 0.9, 3: 0.7},
                    pair_weights={(1, 3): 1.4, (1, 2): 0.3}, **extra)


def test_gradient_check_generic_states():
    spec = three_uav_spec()
    sub = subsystem(loop_graph(3), 1)
    states = random_states(spec, sub, 4, 40, make_rng(2))
    report = gradient_check(spec, sub, states)
    assert report.passed, report.failures
    assert report.checked + report.excluded == 40


def test_gradient_check_skips_obstacle_edges():
    spec = three_uav_spec(obstacles=(Obstacle(10.0, 20.0, 10.0, 20.0, 120.0),))
    sub = subsystem(loop_graph(3), 1)
    state = np.zeros((3, 4))
    state[:, :2] = [[10.0, 15.0], [30.0, 5.0], [0.0, 40.0]]
    report = gradient_check(spec, sub, state[None])
    assert report.excluded == 1 and report.checked == 0
    assert not report.passed


def test_report_serializes():
    report = ValidationReport("demo")
    payload = report.to_dict()
    assert payload["suite"] == "demo" and payload["passed"] is True


def test_invariant_suite_passes():
    report = run_invariant_suite(seed=0)
    assert report.passed, report.failed_checks


def test_oracle_suite_passes():
    report = run_oracle_suite(seed=0)
    assert report.passed, report.failed_checks
    assert "weighting_resolution" in report.metadata
