"""
verify.py
Nash certification by best-response search, and the exact open-loop Nash
oracle for LQ games.

A profile is certified when no player can lower its own cost by more than
the tolerance through a unilateral deviation found by the search (simplex
from the current strategy plus seeded uniform multistarts). The search is
incomplete, so certification is only as strong as the reported budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from nash_evo.core.errors import ConfigError, GameSpecError, SingularSystemError
from nash_evo.core.evaluator import CostEvaluator
from nash_evo.core.game_model import (
    DynamicGame,
    StrategyMode,
    StrategyProfile,
    evaluate_all_costs,
    profile_from_vector,
    profile_to_vector,
    splice,
    validate_profile,
    variable_layout,
)
from nash_evo.core.local_search import SimplexConfig, clamped, simplex_minimize

log = logging.getLogger("NashVerifier")

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SearchBudget:
    multistarts: int = 8
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.multistarts < 0:
            raise ConfigError("verification.multistarts must be >= 0", field="verification.multistarts")
        if self.max_iterations < 0:
            raise ConfigError("verification.max_iterations must be >= 0", field="verification.max_iterations")


class BestResponse(NamedTuple):
    gap: float
    deviation: StrategyProfile
    cost: float
    deviation_cost: float
    iterations: int
    evaluations: int


@dataclass
class NashReport:
    gaps: np.ndarray
    deviations: list[StrategyProfile]
    costs: np.ndarray
    deviation_costs: np.ndarray
    tolerance: float
    multistarts: int
    iterations: list[int] = field(default_factory=list)
    evaluations: int = 0
    seed: int = 0

    @property
    def certified(self) -> bool:
        return bool(np.max(self.gaps, initial=0.0) <= self.tolerance)

    @property
    def failing_players(self) -> list[int]:
        return [i for i, g in enumerate(self.gaps) if g > self.tolerance]

    def to_dict(self) -> dict[str, Any]:
        return {
            "certified": self.certified,
            "tolerance": float(self.tolerance),
            "max_gap": float(np.max(self.gaps, initial=0.0)),
            "failing_players": self.failing_players,
            "players": [
                {
                    "player": i,
                    "cost": float(self.costs[i]),
                    "best_response_gap": float(self.gaps[i]),
                    "deviation_cost": float(self.deviation_costs[i]),
                    "deviation": profile_to_vector(self.deviations[i]).tolist(),
                    "simplex_iterations": int(self.iterations[i]) if self.iterations else 0,
                }
                for i in range(len(self.gaps))
            ],
            "search": {"multistarts": self.multistarts, "seed": self.seed, "evaluations": self.evaluations},
        }


# ----------------------------------------------------------------------
# Best-response search
# ----------------------------------------------------------------------
def search_best_response(game: DynamicGame, profile: StrategyProfile, player: int,
                         budget: SearchBudget = SearchBudget(),
                         simplex: SimplexConfig = SimplexConfig()) -> BestResponse:
    """Lowest cost player `player` finds by deviating alone, with search effort."""
    game.check_player(player)
    validate_profile(game, profile)
    evaluator = CostEvaluator(game, profile.mode)
    # deviations are scored on the clamped joint vector, so the reference cost is too
    vec = evaluator.clamp(profile_to_vector(profile))
    active = variable_layout(game, profile.mode)[player]
    lower, upper = evaluator.lower[active], evaluator.upper[active]
    current = evaluator.cost(vec, player)

    def objective(values: np.ndarray) -> float:
        return evaluator.cost(splice(vec, active, values), player)

    search = clamped(objective, lower, upper)
    # one stream per player; the first k starts do not depend on the multistart count
    rng = np.random.default_rng([budget.seed, player])
    starts = [np.clip(vec[active], lower, upper)]
    starts += [rng.uniform(lower, upper) for _ in range(budget.multistarts)]

    best_point, best_value, iterations = None, np.inf, 0
    for start in starts:
        found = simplex_minimize(search, start, simplex, max_iterations=budget.max_iterations)
        iterations += found.iterations
        if found.value < best_value:
            best_point, best_value = found.point, found.value

    if best_value < current:
        deviation = profile_from_vector(game, profile.mode, splice(vec, active, np.clip(best_point, lower, upper)))
        gap = current - best_value
    else:
        deviation, gap = profile, 0.0
        best_value = current
    log.debug("Player %d: cost %.6g, best deviation %.6g, gap %.3g", player, current, best_value, gap)
    return BestResponse(float(gap), deviation, float(current), float(best_value), iterations, evaluator.evaluations)


def best_response_gap(game: DynamicGame, profile: StrategyProfile, player: int,
                      budget: SearchBudget = SearchBudget(),
                      simplex: SimplexConfig = SimplexConfig()) -> tuple[float, StrategyProfile]:
    """max(0, J_i(profile) - best deviation cost found) and the deviating profile."""
    found = search_best_response(game, profile, player, budget, simplex)
    return found.gap, found.deviation


def certify_nash(game: DynamicGame, profile: StrategyProfile, tolerance: float = 1e-3,
                 budget: SearchBudget = SearchBudget(),
                 simplex: SimplexConfig = SimplexConfig()) -> NashReport:
    if not tolerance > 0:
        raise ValueError(f"certification tolerance must be positive, got {tolerance}")
    results = [search_best_response(game, profile, i, budget, simplex) for i in range(game.num_players)]
    report = NashReport(
        gaps=np.array([r.gap for r in results]),
        deviations=[r.deviation for r in results],
        costs=np.array([r.cost for r in results]),
        deviation_costs=np.array([r.deviation_cost for r in results]),
        tolerance=float(tolerance),
        multistarts=budget.multistarts,
        iterations=[r.iterations for r in results],
        evaluations=sum(r.evaluations for r in results),
        seed=budget.seed,
    )
    if report.certified:
        log.info("Profile certified at tolerance %g (max gap %.3g)", tolerance, report.gaps.max(initial=0.0))
    else:
        log.info("Profile NOT certified at tolerance %g: players %s can deviate", tolerance, report.failing_players)
    return report


# ----------------------------------------------------------------------
# LQ open-loop oracle
# ----------------------------------------------------------------------
def _state_maps(game: DynamicGame) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """x_k = s_k + G_k U for the joint open-loop control vector U, k = 0..K."""
    spec = game.lq_spec
    n, K = game.state_dim, game.horizon
    layout = variable_layout(game, StrategyMode.OPEN_LOOP)
    total = layout[-1].stop if layout else 0
    s = [np.array(game.initial_state, dtype=float)]
    G = [np.zeros((n, total))]
    for k in range(K):
        E = np.zeros((n, total))
        for j, m in enumerate(game.control_dims):
            start = layout[j].start + k * m
            E[:, start:start + m] = spec.b_matrices[j][k]
        s.append(spec.a_matrices[k] @ s[-1])
        G.append(spec.a_matrices[k] @ G[-1] + E)
    return s, G


def lq_quadratic_form(game: DynamicGame, player: int) -> tuple[np.ndarray, np.ndarray, float]:
    """(H, h, c) with J_i(U) = U'HU + 2h'U + c over the joint open-loop control vector."""
    if game.lq_spec is None:
        raise GameSpecError(f"game '{game.name}' carries no LQ parameters")
    game.check_player(player)
    spec = game.lq_spec
    s, G = _state_maps(game)
    K = game.horizon
    total = G[0].shape[1]
    H, h, c = np.zeros((total, total)), np.zeros(total), 0.0
    for k in range(1, K + 1):
        W = spec.state_weights[player] + (spec.terminal_weights[player] if k == K else 0.0)
        H += G[k].T @ W @ G[k]
        h += G[k].T @ W @ s[k]
        c += float(s[k] @ W @ s[k])
    if K == 0:
        c += float(s[0] @ spec.terminal_weights[player] @ s[0])
    own = variable_layout(game, StrategyMode.OPEN_LOOP)[player]
    m = game.control_dims[player]
    R = spec.control_weights[player]
    for k in range(K):
        idx = slice(own.start + k * m, own.start + (k + 1) * m)
        H[idx, idx] += R
    return H, h, c


def lq_openloop_nash(game: DynamicGame) -> StrategyProfile:
    """Exact open-loop Nash profile of an LQ game.

    Stacks each player's stationarity condition H_i[own] U + h_i[own] = 0
    into one square system M U = -m.
    """
    layout = variable_layout(game, StrategyMode.OPEN_LOOP)
    forms = [lq_quadratic_form(game, i) for i in range(game.num_players)]
    M = np.vstack([H[own, :] for (H, _, _), own in zip(forms, layout)])
    rhs = -np.concatenate([h[own] for (_, h, _), own in zip(forms, layout)])
    if M.size == 0:
        return profile_from_vector(game, StrategyMode.OPEN_LOOP, np.zeros(0))

    condition = float(np.linalg.cond(M))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularSystemError(
            f"first-order system of game '{game.name}' is singular (condition {condition:.3g}); "
            f"the open-loop equilibrium is not unique",
            condition=condition,
        )
    U = np.linalg.solve(M, rhs)
    bound = game.lq_spec.control_bound
    if np.any(np.abs(U) > bound):
        log.warning("LQ Nash controls exceed the control bound %g (max |u| = %.4g)", bound, np.abs(U).max())
    profile = profile_from_vector(game, StrategyMode.OPEN_LOOP, U)
    log.debug("LQ open-loop Nash costs %s (condition %.3g)", evaluate_all_costs(game, profile), condition)
    return profile
