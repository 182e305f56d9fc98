import numpy as np
import pytest

from nash_evo.core.game_model import DynamicGame
from nash_evo.core.templates import build_game, build_lq_game, random_lq_spec


def make_game(num_players, horizon, transition, stage_costs, terminal_costs=None,
              bound=5.0, state_dim=1, x0=(1.0,), control_dims=None, name="test"):
    dims = control_dims or (1,) * num_players
    return DynamicGame(
        num_players=num_players,
        horizon=horizon,
        state_dim=state_dim,
        control_dims=dims,
        transition=transition,
        stage_costs=tuple(stage_costs),
        terminal_costs=tuple(terminal_costs or [lambda x: 0.0] * num_players),
        initial_state=np.array(x0),
        lower_bounds=tuple(np.full((horizon, m), -bound) for m in dims),
        upper_bounds=tuple(np.full((horizon, m), bound) for m in dims),
        name=name,
    )


@pytest.fixture
def hand_game():
    """x_1 = 1 + u_1 + u_2, J_i = x_1^2 + u_i^2; Nash u_i = -1/3 with J_i = 2/9."""
    return build_game("lq")


@pytest.fixture
def zero_cost_game():
    return make_game(
        2, 2,
        transition=lambda k, x, us: x + us[0] + us[1],
        stage_costs=[lambda k, x, us: 0.0, lambda k, x, us: 0.0],
    )


@pytest.fixture
def target_game():
    """Single player, J = (u - 2)^2 on [-5, 5]."""
    return make_game(
        1, 1,
        transition=lambda k, x, us: x + us[0],
        stage_costs=[lambda k, x, us: float((us[0][0] - 2.0) ** 2)],
    )


@pytest.fixture
def random_lq_game():
    return build_lq_game(random_lq_spec(num_players=2, horizon=3, seed=1), name="lq_random")
