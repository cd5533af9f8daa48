import numpy as np
import pytest
from hypothesis import given, strategies as st

from costs import CostSpec, Obstacle, TerminalCost, derive_control_weight, joint_control_weight
from dynamics import JointState, actuated_control_matrix, make_integrator, make_unicycle
from network import line_graph, loop_graph, subsystem
from pic import (
    ScoringError,
    ScoringOptions,
    estimate_control,
    estimate_from_batch,
    initial_control,
    path_distribution,
    path_value,
    score_batch,
    step_weight_matrix,
)
from sampler import RolloutBatch, Rollout, assemble_joint_batch, make_rng, sample_agent_paths

"""Tests for path values, the path distribution and the control estimate"""

SOLO = subsystem(line_graph(1), 1)
NO_COST_1D = CostSpec(goals=np.zeros((1, 1)), goal_weights={}, position_dims=(0,), nonact_dim=0)


def integrator_rollout(x0, segments, eps):
    return Rollout(JointState(SOLO, [x0]), np.reshape(segments, (-1, 1)), eps)


def test_step_weight_identity():
    model = make_integrator(1.0)
    weights = step_weight_matrix(model, JointState(SOLO, [0.3]))
    assert np.allclose(weights.H, [[1.0]]) and weights.logdet == 0.0


def test_step_weight_two_unicycles():
    model = make_unicycle(0.1, 0.05, 0.75, 0.65)
    s = JointState(subsystem(line_graph(2), 1), np.zeros(8))
    weights = step_weight_matrix(model, s)
    assert np.allclose(weights.H, np.diag([0.5625, 0.4225, 0.5625, 0.4225]))
    assert np.allclose(weights.H_inv @ weights.H, np.eye(4))


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_step_weight_does_not_depend_on_lambda(lam):
    model = make_unicycle(0.1, 0.05, 0.75, 0.65)
    s = JointState(subsystem(line_graph(2), 1), [3.0, 4.0, 1.2, 0.4, 6.0, 1.0, 0.8, -0.3])
    bd = actuated_control_matrix(model, s)
    r = joint_control_weight(derive_control_weight(model.sampling_noise_scale, lam), 2)
    assert np.allclose(lam * bd @ np.linalg.inv(r) @ bd.T, step_weight_matrix(model, s).H)


def test_singular_step_weight_rejected():
    model = make_unicycle(0.1, 0.05, 0.75, 0.0)
    with pytest.raises(ScoringError):
        step_weight_matrix(model, JointState(SOLO, np.zeros(4)))


def test_path_value_of_noiseless_rollout():
    r = integrator_rollout(0.0, [0.0, 0.0], 0.1)
    assert path_value(NO_COST_1D, make_integrator(1.0), r) == pytest.approx(0.0)


def test_path_value_arithmetic():
    # alpha = 0.3 / 0.1 = 3, H = 2^2 = 4
    r = integrator_rollout(0.0, [0.3], 0.1)
    value = path_value(NO_COST_1D, make_integrator(1.0, sampling_sigma=2.0), r)
    assert value == pytest.approx(0.1 / 2 * 9 / 4 + 0.5 * np.log(4.0))
    assert value == pytest.approx(0.8056, abs=1e-4)


def test_alpha_scaling_follows_lambda():
    costs = CostSpec(goals=np.zeros((1, 1)), goal_weights={}, lam=2.0, position_dims=(0,), nonact_dim=0)
    r = integrator_rollout(0.0, [0.3], 0.1)
    model = make_integrator(1.0, sampling_sigma=2.0)
    over = path_value(costs, model, r, ScoringOptions(alpha_over_lambda=True))
    plain = path_value(costs, model, r, ScoringOptions(alpha_over_lambda=False))
    assert over == pytest.approx(0.1 / 4 * 9 / 4 + 0.5 * np.log(4.0))
    assert plain == pytest.approx(0.1 / 2 * 9 / 4 + 0.5 * np.log(4.0))


def test_state_and_density_parts():
    costs = CostSpec(goals=np.zeros((1, 1)), goal_weights={1: 1.0}, lam=1.0,
                     terminal=TerminalCost("quadratic", kappa=2.0), position_dims=(0,), nonact_dim=0)
    batch = RolloutBatch.from_rollouts([integrator_rollout(1.0, [1.5, 2.0], 0.5)])
    scores = score_batch(costs, make_integrator(1.0), batch)
    # phi = 2 * 2^2, q = |1| + |1.5| summed over the first two states
    assert scores.state_cost[0] == pytest.approx(8.0 + 0.5 * 2.5)
    assert scores.s_tilde[0] == pytest.approx(scores.state_cost[0] + scores.density_cost[0])
    assert scores[0].weighting_value("passive") == scores.state_cost[0]
    assert scores[0].weighting_value("generalized") == scores.s_tilde[0]


def test_initial_control_with_constant_cost():
    model = make_integrator(1.0, sampling_sigma=2.0)
    still = integrator_rollout(0.0, [0.0, 0.1], 0.1)
    assert np.allclose(initial_control(NO_COST_1D, model, still), 0.0)
    moving = integrator_rollout(0.0, [0.3, 0.1], 0.1)
    assert np.allclose(initial_control(NO_COST_1D, model, moving), 3.0 / 4.0)


def test_initial_control_includes_cost_gradient():
    costs = CostSpec(goals=np.zeros((1, 1)), goal_weights={1: 2.0}, lam=0.5, position_dims=(0,), nonact_dim=0)
    u = initial_control(costs, make_integrator(1.0), integrator_rollout(1.0, [1.0], 0.1))
    assert np.allclose(u, -(0.1 / 0.5) * 2.0)
    fd = initial_control(costs, make_integrator(1.0), integrator_rollout(1.0, [1.0], 0.1),
                         ScoringOptions(gradient="finite-difference"))
    assert np.allclose(fd, u, atol=1e-6)


def test_path_distribution_examples():
    probs, ess = path_distribution([0.0, np.log(2.0)])
    assert np.allclose(probs, [2 / 3, 1 / 3])
    assert ess == pytest.approx(1.0 / (4 / 9 + 1 / 9))
    probs, ess = path_distribution([3.0] * 5)
    assert np.allclose(probs, 0.2) and ess == pytest.approx(5.0)
    probs, ess = path_distribution([42.0])
    assert probs.tolist() == [1.0] and ess == 1.0


def test_path_distribution_survives_large_values():
    probs, _ = path_distribution([1e6, 1e6 + 1.0])
    assert np.all(np.isfinite(probs)) and probs.sum() == pytest.approx(1.0)


def test_nan_path_value_rejected():
    with pytest.raises(ScoringError):
        path_distribution([0.0, np.nan])
    with pytest.raises(ScoringError):
        path_distribution([0.0, np.inf])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(-1e3, 1e3))
def test_softmax_normalized_and_shift_invariant(values, shift):
    probs, ess = path_distribution(values)
    shifted, _ = path_distribution(np.asarray(values) + shift)
    assert abs(probs.sum() - 1.0) <= 1e-12
    assert np.allclose(probs, shifted, atol=1e-9)
    assert 1.0 - 1e-9 <= ess <= len(values) + 1e-9


def test_single_rollout_estimate():
    model = make_integrator(1.0, sampling_sigma=2.0)
    batch = RolloutBatch.from_rollouts([integrator_rollout(0.0, [0.3], 0.1)])
    estimate, scores = estimate_from_batch(NO_COST_1D, model, batch)
    # sigma_s^2 * H^-1 alpha = 4 * 3 / 4
    assert np.allclose(estimate.joint, [3.0])
    assert estimate.ess == 1.0


def test_zero_initial_controls_give_zero_estimate():
    model = make_unicycle(0.1, 0.05, 0.75, 0.65)
    sub = subsystem(loop_graph(3), 1)
    paths = [sample_agent_paths(model, [5.0, 5.0 + k, 0.3, 0.0], 2, 0.2, 4, make_rng(1, k), agent=k)
             for k in (1, 2, 3)]
    batch = assemble_joint_batch(sub, paths)
    scores = score_batch(CostSpec(goals=np.zeros((3, 4)), goal_weights={}), model, batch)
    zeroed = [scores[y] for y in range(len(batch))]
    zeroed = [type(s)(s.s_tilde, np.zeros_like(s.u_tilde), s.state_cost, s.density_cost) for s in zeroed]
    estimate = estimate_control(model, batch, zeroed, np.full(4, 0.25))
    assert not np.any(estimate.joint)
    assert estimate.local.shape == (2,)


def test_noise_free_sampling_estimates_zero():
    model = make_unicycle(0.0, 0.0, 0.0, 0.0)
    sub = subsystem(line_graph(1), 1)
    batch = assemble_joint_batch(sub, [sample_agent_paths(model, [0.0, 0.0, 1.0, 0.0], 3, 0.2, 5, make_rng(0))])
    costs = CostSpec(goals=np.array([[10.0, 0.0, 0.0, 0.0]]), goal_weights={1: 1.0})
    estimate, _ = estimate_from_batch(costs, model, batch)
    assert not np.any(estimate.joint)


def test_estimate_points_toward_goal():
    """With many rollouts, the unicycle's heading control turns it toward the goal."""
    model = make_unicycle(0.1, 0.05, 0.75, 0.65)
    sub = subsystem(line_graph(1), 1)
    costs = CostSpec(goals=np.array([[10.0, 10.0, 0.0, 0.0]]), goal_weights={1: 1.0})
    paths = sample_agent_paths(model, [0.0, 0.0, 1.0, 0.0], 4, 0.5, 4000, make_rng(9))
    estimate, _ = estimate_from_batch(costs, model, assemble_joint_batch(sub, [paths]))
    assert estimate.local[1] > 0.0
    assert estimate.local[0] > 0.0


def test_rollout_jumping_over_obstacle_costs_more():
    model = make_unicycle(0.1, 0.05, 0.75, 0.65)
    sub = subsystem(line_graph(1), 1)
    paths = np.zeros((2, 3, 1, 4))
    paths[..., 2] = 1.0
    paths[0, :, 0, :2] = [[10.0, 7.0], [26.0, 7.0], [30.0, 7.0]]
    paths[1, :, 0, :2] = [[10.0, 7.0], [10.0, 20.0], [30.0, 20.0]]
    batch = RolloutBatch(sub, paths, 0.5)
    wall = [Obstacle(15, 21, 3, 11, penalty=120.0)]

    scores = score_batch(CostSpec(goals=np.zeros((1, 4)), goal_weights={}, obstacles=wall), model, batch)
    assert scores.state_cost[0] == pytest.approx(0.5 * 120.0)
    assert scores.state_cost[1] == 0.0

    # grid points alone never land inside the wall
    points = CostSpec(goals=np.zeros((1, 4)), goal_weights={}, obstacles=wall, obstacle_check="point")
    assert not np.any(score_batch(points, model, batch).state_cost)
