"""
game_model.py
N-player, K-stage discrete-time dynamic games.

A DynamicGame bundles the state transition, per-player stage and terminal
costs, control bounds and the initial state. Strategy profiles are either
open-loop control sequences or stage-wise linear feedback laws
u_{i,k} = G_{i,k} x_k + b_{i,k}. Solvers and the verifier work on a flat
joint variable vector whose layout is defined here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np

from nash_evo.core.errors import DimensionError, GameSpecError, ModelDefectError

log = logging.getLogger("GameModel")

Controls = tuple[np.ndarray, ...]
Transition = Callable[[int, np.ndarray, Controls], np.ndarray]
StageCost = Callable[[int, np.ndarray, Controls], float]
TerminalCost = Callable[[np.ndarray], float]


class StrategyMode(str, Enum):
    OPEN_LOOP = "open_loop"
    FEEDBACK = "feedback"


def _readonly(values: Any, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = np.array(np.broadcast_to(arr, shape), dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DynamicGame:
    """Immutable description of a deterministic N-player, K-stage game.

    lower_bounds / upper_bounds hold one (K, m_i) array per player; scalars
    and per-component vectors are broadcast on construction.
    """

    num_players: int
    horizon: int
    state_dim: int
    control_dims: tuple[int, ...]
    transition: Transition
    stage_costs: tuple[StageCost, ...]
    terminal_costs: tuple[TerminalCost, ...]
    initial_state: np.ndarray
    lower_bounds: tuple[np.ndarray, ...]
    upper_bounds: tuple[np.ndarray, ...]
    gain_limit: float = 1.0
    name: str = "custom"
    lq_spec: Any = None

    def __post_init__(self):
        if self.num_players < 1:
            raise GameSpecError("num_players must be >= 1")
        if self.horizon < 0:
            raise GameSpecError("horizon must be >= 0")
        if self.state_dim < 1:
            raise GameSpecError("state_dim must be >= 1")

        dims = tuple(int(m) for m in self.control_dims)
        if len(dims) != self.num_players or any(m < 1 for m in dims):
            raise GameSpecError(f"control_dims must list {self.num_players} positive integers, got {dims}")
        if len(self.stage_costs) != self.num_players or len(self.terminal_costs) != self.num_players:
            raise GameSpecError("one stage cost and one terminal cost per player are required")
        if not self.gain_limit > 0:
            raise GameSpecError("gain_limit must be positive")

        x0 = _readonly(self.initial_state).reshape(-1)
        if x0.shape != (self.state_dim,):
            raise DimensionError(f"initial_state has shape {x0.shape}, expected ({self.state_dim},)")
        x0.setflags(write=False)

        if len(self.lower_bounds) != self.num_players or len(self.upper_bounds) != self.num_players:
            raise GameSpecError("control bounds must be given for every player")
        lower, upper = [], []
        for i, m in enumerate(dims):
            shape = (self.horizon, m)
            try:
                lo = _readonly(self.lower_bounds[i], shape)
                hi = _readonly(self.upper_bounds[i], shape)
            except ValueError as e:
                raise DimensionError(f"control bounds of player {i} do not fit shape {shape}: {e}") from e
            bad = np.argwhere(lo > hi)
            if bad.size:
                k, c = bad[0]
                raise GameSpecError(
                    f"empty control interval for player {i}, stage {k}, component {c}: "
                    f"[{lo[k, c]}, {hi[k, c]}]"
                )
            lower.append(lo)
            upper.append(hi)

        object.__setattr__(self, "control_dims", dims)
        object.__setattr__(self, "stage_costs", tuple(self.stage_costs))
        object.__setattr__(self, "terminal_costs", tuple(self.terminal_costs))
        object.__setattr__(self, "initial_state", x0)
        object.__setattr__(self, "lower_bounds", tuple(lower))
        object.__setattr__(self, "upper_bounds", tuple(upper))

    def check_player(self, player: int):
        if not 0 <= player < self.num_players:
            raise DimensionError(f"player index {player} outside 0..{self.num_players - 1}")


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Joint strategy of all players.

    Open-loop: controls[i] has shape (K, m_i).
    Feedback: gains[i] has shape (K, m_i, n) and offsets[i] shape (K, m_i).
    """

    mode: StrategyMode
    controls: tuple[np.ndarray, ...] = ()
    gains: tuple[np.ndarray, ...] = ()
    offsets: tuple[np.ndarray, ...] = ()

    @classmethod
    def open_loop(cls, controls: Sequence[Any]) -> "StrategyProfile":
        """Build an open-loop profile; a 1-D sequence per player means scalar controls."""
        arrays = []
        for c in controls:
            a = np.array(c, dtype=float)
            if a.ndim == 1:
                a = a.reshape(-1, 1)
            arrays.append(a)
        return cls(StrategyMode.OPEN_LOOP, controls=tuple(arrays))

    @classmethod
    def feedback(cls, gains: Sequence[Any], offsets: Sequence[Any]) -> "StrategyProfile":
        return cls(
            StrategyMode.FEEDBACK,
            gains=tuple(np.array(g, dtype=float) for g in gains),
            offsets=tuple(np.array(b, dtype=float) for b in offsets),
        )

    @classmethod
    def zeros(cls, game: DynamicGame, mode: StrategyMode = StrategyMode.OPEN_LOOP) -> "StrategyProfile":
        return profile_from_vector(game, mode, np.zeros(variable_count(game, mode)))

    @property
    def num_players(self) -> int:
        return len(self.controls) if self.mode is StrategyMode.OPEN_LOOP else len(self.gains)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Realized states x_0..x_K and per-player controls u_{i,0..K-1}."""

    states: np.ndarray
    realized_controls: tuple[np.ndarray, ...]

    def controls_at(self, k: int) -> Controls:
        return tuple(u[k] for u in self.realized_controls)


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------
def validate_profile(game: DynamicGame, profile: StrategyProfile):
    """Raise DimensionError naming the first player/stage that does not fit the game."""
    if profile.num_players != game.num_players:
        raise DimensionError(f"profile has {profile.num_players} players, game has {game.num_players}")
    K, n = game.horizon, game.state_dim
    for i, m in enumerate(game.control_dims):
        if profile.mode is StrategyMode.OPEN_LOOP:
            u = profile.controls[i]
            if u.ndim != 2 or u.shape[0] != K:
                raise DimensionError(f"player {i}: {u.shape[0] if u.ndim else 0} stages of controls, expected {K}")
            if u.shape[1] != m:
                raise DimensionError(f"player {i}, stage 0: control of size {u.shape[1]}, expected {m}")
        else:
            g, b = profile.gains[i], profile.offsets[i]
            if g.ndim != 3 or g.shape[0] != K or b.ndim != 2 or b.shape[0] != K:
                raise DimensionError(f"player {i}: feedback law must cover {K} stages")
            if g.shape[1:] != (m, n):
                raise DimensionError(f"player {i}: gain of shape {g.shape[1:]}, expected {(m, n)}")
            if b.shape[1] != m:
                raise DimensionError(f"player {i}: offset of size {b.shape[1]}, expected {m}")


def _next_state(game: DynamicGame, k: int, x: np.ndarray, us: Controls) -> np.ndarray:
    x_next = np.asarray(game.transition(k, x, us), dtype=float).reshape(-1)
    if x_next.shape != (game.state_dim,):
        raise DimensionError(
            f"transition at stage {k} returned a state of size {x_next.size}, expected {game.state_dim}"
        )
    if not np.all(np.isfinite(x_next)):
        raise ModelDefectError(f"non-finite state at stage {k + 1}")
    return x_next


# ----------------------------------------------------------------------
# Simulation and costs
# ----------------------------------------------------------------------
def simulate(game: DynamicGame, profile: StrategyProfile) -> Trajectory:
    """Roll the dynamics forward under a profile.

    Feedback laws are evaluated on the realized state and the resulting
    control is clipped to the stage's control bounds.
    """
    validate_profile(game, profile)
    K = game.horizon
    states = np.empty((K + 1, game.state_dim))
    states[0] = game.initial_state
    realized = [np.empty((K, m)) for m in game.control_dims]

    x = states[0]
    for k in range(K):
        if profile.mode is StrategyMode.OPEN_LOOP:
            us = tuple(profile.controls[i][k] for i in range(game.num_players))
        else:
            us = tuple(
                np.clip(
                    profile.gains[i][k] @ x + profile.offsets[i][k],
                    game.lower_bounds[i][k],
                    game.upper_bounds[i][k],
                )
                for i in range(game.num_players)
            )
        for i, u in enumerate(us):
            realized[i][k] = u
        x = _next_state(game, k, x, us)
        states[k + 1] = x

    states.setflags(write=False)
    for u in realized:
        u.setflags(write=False)
    return Trajectory(states=states, realized_controls=tuple(realized))


def _cost_along(game: DynamicGame, traj: Trajectory, player: int) -> float:
    g = game.stage_costs[player]
    total = 0.0
    for k in range(game.horizon):
        total += float(g(k, traj.states[k], traj.controls_at(k)))
    total += float(game.terminal_costs[player](traj.states[game.horizon]))
    if not math.isfinite(total):
        raise ModelDefectError(f"non-finite cost for player {player} (model defect in game '{game.name}')")
    return total


def evaluate_cost(game: DynamicGame, profile: StrategyProfile, player: int) -> float:
    """J_i: running costs along the simulated trajectory plus the terminal cost."""
    game.check_player(player)
    return _cost_along(game, simulate(game, profile), player)


def evaluate_all_costs(game: DynamicGame, profile: StrategyProfile) -> np.ndarray:
    """All players' costs from a single simulation."""
    traj = simulate(game, profile)
    return np.array([_cost_along(game, traj, i) for i in range(game.num_players)])


# ----------------------------------------------------------------------
# Joint variable vector
# ----------------------------------------------------------------------
def variables_per_player(game: DynamicGame, mode: StrategyMode) -> tuple[int, ...]:
    K, n = game.horizon, game.state_dim
    if StrategyMode(mode) is StrategyMode.OPEN_LOOP:
        return tuple(K * m for m in game.control_dims)
    return tuple(K * m * (n + 1) for m in game.control_dims)


def variable_count(game: DynamicGame, mode: StrategyMode) -> int:
    return sum(variables_per_player(game, mode))


def variable_layout(game: DynamicGame, mode: StrategyMode) -> tuple[slice, ...]:
    """Contiguous per-player slices of the joint vector (player-major)."""
    slices, start = [], 0
    for count in variables_per_player(game, mode):
        slices.append(slice(start, start + count))
        start += count
    return tuple(slices)


def variable_bounds(game: DynamicGame, mode: StrategyMode) -> tuple[np.ndarray, np.ndarray]:
    """Box bounds of the joint vector.

    Open-loop variables take the control bounds. Feedback gains lie in
    [-gain_limit, gain_limit]; offsets take the stage's control bounds.
    """
    lows, highs = [], []
    n = game.state_dim
    for i, m in enumerate(game.control_dims):
        lo, hi = game.lower_bounds[i], game.upper_bounds[i]
        if StrategyMode(mode) is StrategyMode.OPEN_LOOP:
            lows.append(lo.ravel())
            highs.append(hi.ravel())
            continue
        block_lo = np.full((game.horizon, m, n + 1), -game.gain_limit)
        block_hi = np.full((game.horizon, m, n + 1), game.gain_limit)
        block_lo[..., n] = lo
        block_hi[..., n] = hi
        lows.append(block_lo.ravel())
        highs.append(block_hi.ravel())
    if not lows:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(lows), np.concatenate(highs)


def profile_from_vector(game: DynamicGame, mode: StrategyMode, vec: np.ndarray) -> StrategyProfile:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (variable_count(game, mode),):
        raise DimensionError(f"joint vector of size {vec.size}, expected {variable_count(game, mode)}")
    K, n = game.horizon, game.state_dim
    parts = [vec[s] for s in variable_layout(game, mode)]
    if StrategyMode(mode) is StrategyMode.OPEN_LOOP:
        return StrategyProfile(
            StrategyMode.OPEN_LOOP,
            controls=tuple(p.reshape(K, m) for p, m in zip(parts, game.control_dims)),
        )
    blocks = [p.reshape(K, m, n + 1) for p, m in zip(parts, game.control_dims)]
    return StrategyProfile(
        StrategyMode.FEEDBACK,
        gains=tuple(b[..., :n] for b in blocks),
        offsets=tuple(b[..., n] for b in blocks),
    )


def profile_to_vector(profile: StrategyProfile) -> np.ndarray:
    if profile.mode is StrategyMode.OPEN_LOOP:
        parts = [np.asarray(u, dtype=float).ravel() for u in profile.controls]
    else:
        parts = [
            np.concatenate([g, b[..., None]], axis=2).ravel()
            for g, b in zip(profile.gains, profile.offsets)
        ]
    return np.concatenate(parts) if parts else np.zeros(0)


def splice(base: np.ndarray, active: slice, values: np.ndarray) -> np.ndarray:
    """Copy of base with the active slice replaced."""
    out = np.array(base, dtype=float)
    out[active] = values
    return out
