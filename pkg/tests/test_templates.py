import numpy as np
import pytest

from nash_evo.core.errors import GameSpecError
from nash_evo.core.game_model import StrategyMode, StrategyProfile, evaluate_all_costs, profile_from_vector
from nash_evo.core.templates import (
    LqSpec,
    available_templates,
    build_game,
    build_lq_game,
    build_two_player_nonquadratic,
    random_lq_spec,
    register_game,
    validate_lq_spec,
)
from nash_evo.core.verify import lq_openloop_nash


def test_builtin_templates_registered():
    assert {"lq", "lq_three_player", "lq_random", "lq_matrices", "nonquadratic"} <= set(available_templates())


def test_lq_template_is_hand_game():
    game = build_game("lq")
    assert game.num_players == 2 and game.horizon == 1
    spec = game.lq_spec
    assert spec.a_matrices[0][0, 0] == 1.0
    costs = evaluate_all_costs(game, StrategyProfile.open_loop([[0.0], [0.0]]))
    np.testing.assert_allclose(costs, [1.0, 1.0])


def test_three_player_template():
    game = build_game("lq_three_player")
    assert game.num_players == 3 and game.horizon == 3


def test_control_bound_parameter():
    game = build_game("lq", {"control_bound": 1.0})
    assert game.upper_bounds[0].max() == 1.0
    assert game.lower_bounds[1].min() == -1.0


def test_unknown_template_and_bad_params():
    with pytest.raises(GameSpecError, match="unknown game template"):
        build_game("no_such_game")
    with pytest.raises(GameSpecError):
        build_game("lq", {"players": 2})


def test_own_control_weight_must_be_positive_definite():
    with pytest.raises(GameSpecError, match="positive definite"):
        build_game("lq", {"control_weight": 0.0})


def test_weight_shape_and_symmetry_checked():
    spec = LqSpec.from_params(a=np.eye(2), b=[np.ones((2, 1))], q=[[[1.0, 0.5], [0.0, 1.0]]], r=[1.0],
                              x0=[1.0, 0.0], horizon=2)
    with pytest.raises(GameSpecError, match="symmetric"):
        validate_lq_spec(spec)
    spec = LqSpec.from_params(a=np.eye(2), b=[np.ones((2, 1))], q=[np.eye(3)], r=[1.0], x0=[1.0, 0.0], horizon=2)
    with pytest.raises(GameSpecError, match="shape"):
        build_lq_game(spec)


def test_random_lq_spec_is_seeded_and_convex():
    a, b = random_lq_spec(seed=4), random_lq_spec(seed=4)
    np.testing.assert_array_equal(a.a_matrices[0], b.a_matrices[0])
    np.testing.assert_array_equal(a.initial_state, b.initial_state)
    spec = random_lq_spec(num_players=3, horizon=2, state_dim=2, control_dim=2, seed=9)
    validate_lq_spec(spec)
    for r in spec.control_weights:
        assert np.linalg.eigvalsh(r).min() >= 1.0
    assert np.abs(np.linalg.eigvals(spec.a_matrices[0])).max() < 1.0


def test_nonquadratic_costs_finite_inside_bounds():
    game = build_game("nonquadratic")
    assert game.lq_spec is None
    rng = np.random.default_rng(0)
    for _ in range(1000):
        vec = rng.uniform(-game.upper_bounds[0].max(), game.upper_bounds[0].max(), 6)
        costs = evaluate_all_costs(game, profile_from_vector(game, StrategyMode.OPEN_LOOP, vec))
        assert np.all(np.isfinite(costs))


def test_nonquadratic_symmetry_under_player_swap():
    game = build_game("nonquadratic")
    u1, u2 = [0.3, -0.2, 0.5], [-0.4, 0.1, 0.7]
    c = evaluate_all_costs(game, StrategyProfile.open_loop([u1, u2]))
    swapped = evaluate_all_costs(game, StrategyProfile.open_loop([u2, u1]))
    np.testing.assert_allclose(swapped, c[::-1], rtol=1e-12)


def test_nonquadratic_bound_scan_rejects_overflow():
    with pytest.raises(GameSpecError, match="bound scan"):
        build_two_player_nonquadratic(exp_rate=[200.0, 200.0])


def test_nonquadratic_degenerates_to_lq():
    game = build_game("nonquadratic", {"quartic_weight": [0.0, 0.0], "exp_weight": [0.0, 0.0]})
    assert game.lq_spec is not None
    lq = build_lq_game(game.lq_spec)
    rng = np.random.default_rng(1)
    vec = rng.uniform(-1, 1, 6)
    np.testing.assert_allclose(
        evaluate_all_costs(game, profile_from_vector(game, StrategyMode.OPEN_LOOP, vec)),
        evaluate_all_costs(lq, profile_from_vector(lq, StrategyMode.OPEN_LOOP, vec)),
        rtol=1e-12,
    )
    np.testing.assert_allclose(
        lq_openloop_nash(game).controls[0], lq_openloop_nash(lq).controls[0], atol=1e-12
    )


def test_register_custom_game():
    register_game("test_custom_lq", lambda **p: build_game("lq", p), replace=True)
    assert build_game("test_custom_lq", {"x0": 2.0}).initial_state[0] == 2.0
    with pytest.raises(GameSpecError, match="already registered"):
        register_game("test_custom_lq", lambda **p: None)
