import numpy as np
import pytest

from nash_evo.core.errors import DimensionError, GameSpecError, ModelDefectError
from nash_evo.core.game_model import (
    StrategyMode,
    StrategyProfile,
    evaluate_all_costs,
    evaluate_cost,
    profile_from_vector,
    profile_to_vector,
    simulate,
    splice,
    variable_bounds,
    variable_count,
    variable_layout,
)
from nash_evo.core.templates import build_lq_game, scalar_lq_spec

from conftest import make_game

THIRD = -1.0 / 3.0


def test_identity_dynamics_keep_state():
    game = make_game(2, 3, lambda k, x, us: x, [lambda k, x, us: 0.0] * 2)
    traj = simulate(game, StrategyProfile.open_loop([[1, 2, 3], [-1, 0, 4]]))
    assert np.all(traj.states == 1.0)
    assert traj.states.shape == (4, 1)


def test_hand_game_trajectory_and_costs(hand_game):
    profile = StrategyProfile.open_loop([[THIRD], [THIRD]])
    traj = simulate(hand_game, profile)
    assert traj.states[0, 0] == 1.0
    assert traj.states[1, 0] == pytest.approx(1.0 / 3.0)
    assert evaluate_cost(hand_game, profile, 0) == pytest.approx(2.0 / 9.0)
    np.testing.assert_allclose(evaluate_all_costs(hand_game, profile), [2.0 / 9.0, 2.0 / 9.0])


def test_trajectory_recomputes_from_transition(random_lq_game):
    rng = np.random.default_rng(3)
    profile = StrategyProfile.open_loop([rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)])
    traj = simulate(random_lq_game, profile)
    for k in range(random_lq_game.horizon):
        expected = random_lq_game.transition(k, traj.states[k], traj.controls_at(k))
        np.testing.assert_array_equal(traj.states[k + 1], expected)
    again = simulate(random_lq_game, profile)
    np.testing.assert_array_equal(traj.states, again.states)


def test_simulate_returns_read_only_arrays(hand_game):
    traj = simulate(hand_game, StrategyProfile.zeros(hand_game))
    with pytest.raises(ValueError):
        traj.states[0, 0] = 5.0


def test_zero_feedback_equals_zero_open_loop(random_lq_game):
    open_loop = StrategyProfile.zeros(random_lq_game, StrategyMode.OPEN_LOOP)
    feedback = StrategyProfile.zeros(random_lq_game, StrategyMode.FEEDBACK)
    np.testing.assert_array_equal(
        evaluate_all_costs(random_lq_game, open_loop), evaluate_all_costs(random_lq_game, feedback)
    )
    np.testing.assert_array_equal(simulate(random_lq_game, open_loop).states, simulate(random_lq_game, feedback).states)


def test_feedback_controls_are_clipped_to_bounds(hand_game):
    profile = StrategyProfile.feedback(gains=[[[[10.0]]], [[[0.0]]]], offsets=[[[0.0]], [[0.0]]])
    traj = simulate(hand_game, profile)
    assert traj.realized_controls[0][0, 0] == 5.0
    assert traj.states[1, 0] == pytest.approx(6.0)


def test_evaluate_all_costs_matches_per_player(random_lq_game):
    rng = np.random.default_rng(0)
    for _ in range(20):
        profile = StrategyProfile.open_loop([rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)])
        costs = evaluate_all_costs(random_lq_game, profile)
        for i in range(2):
            assert costs[i] == evaluate_cost(random_lq_game, profile, i)


def test_single_player_cost_matches_quadratic_form():
    # x_{k+1} = 0.8 x_k + u_k, J = sum x_{k+1}^2 + 2 u_k^2 over K = 3
    game = build_lq_game(scalar_lq_spec(num_players=1, horizon=3, a=0.8, control_weight=2.0))
    u = np.array([0.3, -0.7, 1.1])
    G = np.array([[1.0, 0.0, 0.0], [0.8, 1.0, 0.0], [0.64, 0.8, 1.0]])
    s = np.array([0.8, 0.64, 0.512])
    x = s + G @ u
    expected = x @ x + 2.0 * u @ u
    assert evaluate_cost(game, StrategyProfile.open_loop([u]), 0) == pytest.approx(expected, rel=1e-12)


def test_lq_cost_is_quadratic_in_controls(random_lq_game):
    rng = np.random.default_rng(5)
    h = 1e-3

    def cost(vec):
        return evaluate_cost(random_lq_game, profile_from_vector(random_lq_game, StrategyMode.OPEN_LOOP, vec), 0)

    e = np.zeros(6)
    e[1] = h
    second = []
    for _ in range(3):
        v = rng.uniform(-1, 1, 6)
        second.append((cost(v + e) - 2 * cost(v) + cost(v - e)) / h ** 2)
    np.testing.assert_allclose(second, second[0], rtol=1e-4)


def test_zero_horizon_game_costs_terminal_only():
    game = build_lq_game(scalar_lq_spec(horizon=0, terminal_weight=3.0, x0=2.0))
    profile = StrategyProfile.open_loop([[], []])
    np.testing.assert_allclose(evaluate_all_costs(game, profile), [12.0, 12.0])
    assert variable_count(game, StrategyMode.OPEN_LOOP) == 0


def test_dimension_error_names_player(hand_game):
    with pytest.raises(DimensionError, match="player 1"):
        simulate(hand_game, StrategyProfile.open_loop([[0.0], [0.0, 0.0]]))
    with pytest.raises(DimensionError):
        simulate(hand_game, StrategyProfile.open_loop([[0.0]]))
    with pytest.raises(DimensionError):
        evaluate_cost(hand_game, StrategyProfile.zeros(hand_game), 2)


def test_non_finite_state_is_model_defect():
    game = make_game(1, 2, lambda k, x, us: x * np.inf, [lambda k, x, us: 0.0])
    with pytest.raises(ModelDefectError):
        simulate(game, StrategyProfile.open_loop([[1.0, 1.0]]))


def test_non_finite_cost_is_model_defect():
    game = make_game(1, 1, lambda k, x, us: x, [lambda k, x, us: float("nan")])
    with pytest.raises(ModelDefectError, match="model defect"):
        evaluate_cost(game, StrategyProfile.open_loop([[0.0]]), 0)


def test_empty_control_interval_rejected():
    with pytest.raises(GameSpecError, match="empty control interval"):
        make_game(1, 1, lambda k, x, us: x, [lambda k, x, us: 0.0], bound=-1.0)


def test_variable_layout_and_bounds_feedback(random_lq_game):
    mode = StrategyMode.FEEDBACK
    layout = variable_layout(random_lq_game, mode)
    assert layout == (slice(0, 6), slice(6, 12))
    lower, upper = variable_bounds(random_lq_game, mode)
    assert lower.shape == (12,)
    # per stage: gain then offset, gains limited by gain_limit
    np.testing.assert_array_equal(upper[:2], [random_lq_game.gain_limit, 5.0])


def test_vector_layout_is_player_major(random_lq_game):
    vec = np.arange(12, dtype=float)
    profile = profile_from_vector(random_lq_game, StrategyMode.FEEDBACK, vec)
    np.testing.assert_array_equal(profile.gains[1][:, 0, 0], [6.0, 8.0, 10.0])
    np.testing.assert_array_equal(profile.offsets[0][:, 0], [1.0, 3.0, 5.0])
    np.testing.assert_array_equal(profile_to_vector(profile), vec)

    ol = profile_from_vector(random_lq_game, StrategyMode.OPEN_LOOP, vec[:6])
    np.testing.assert_array_equal(ol.controls[1][:, 0], [3.0, 4.0, 5.0])


def test_splice_copies():
    base = np.zeros(4)
    out = splice(base, slice(2, 4), [1.0, 2.0])
    np.testing.assert_array_equal(out, [0, 0, 1, 2])
    assert not base.any()
