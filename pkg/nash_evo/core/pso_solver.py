"""
pso_solver.py
Co-evolutionary global-best particle swarm optimizer.

Particles live in the joint variable space. In every iteration the players
take turns: player i's slice of every particle moves under the linearly
decaying inertia schedule while the other players sit at their broadcast
best strategies. Optional simplex refinement turns the run into hybrid PSO,
and a stagnating swarm has part of its particles re-seeded.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from nash_evo.core.errors import ConfigError, ModelDefectError, SolverAbortedError
from nash_evo.core.evaluator import CostEvaluator
from nash_evo.core.event_bus import (
    SOLVER_FINISHED,
    SOLVER_STARTED,
    STAGNATION_MUTATION,
    TRACE_ROW,
    EventBus,
)
from nash_evo.core.game_model import DynamicGame, StrategyMode, profile_from_vector, splice, variable_layout
from nash_evo.core.local_search import SimplexConfig, clamped, simplex_minimize
from nash_evo.core.result import SolveResult, TraceRow, best_cost_stalled

log = logging.getLogger("PsoSolver")

HYBRID_SCOPES = ("all", "best")


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 30
    c1: float = 1.8
    c2: float = 1.8
    omega_max: float = 0.9
    omega_min: float = 0.4
    t_max: int = 2000
    v_max: float | None = None          # None: 0.2 x bound width per dimension
    hybrid_iter: int = 0                # simplex iterations per refinement, 0 = plain PSO
    hybrid_scope: str = "all"           # refine every particle or only the step's best
    stagnation_window: int = 20
    mutation_fraction: float = 0.2
    mutation_enabled: bool = True
    per_dimension_random: bool = False
    stall_window: int = 100
    stall_tolerance: float = 1e-10
    rng_seed: int = 0
    initial_guess: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ConfigError("pso.swarm_size must be >= 1", field="pso.swarm_size")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("pso.c1 and pso.c2 must be >= 0", field="pso.c1")
        if not 0 <= self.omega_min <= self.omega_max:
            raise ConfigError(
                f"pso.omega_min ({self.omega_min}) must lie in [0, omega_max ({self.omega_max})]",
                field="pso.omega_min",
            )
        if self.t_max < 1:
            raise ConfigError("pso.t_max must be >= 1", field="pso.t_max")
        if self.v_max is not None and not self.v_max > 0:
            raise ConfigError(f"pso.v_max must be > 0, got {self.v_max}", field="pso.v_max")
        if self.hybrid_iter < 0:
            raise ConfigError("pso.hybrid_iter must be >= 0", field="pso.hybrid_iter")
        if self.hybrid_scope not in HYBRID_SCOPES:
            raise ConfigError(f"pso.hybrid_scope must be one of {HYBRID_SCOPES}", field="pso.hybrid_scope")
        if self.stagnation_window < 1:
            raise ConfigError("pso.stagnation_window must be >= 1", field="pso.stagnation_window")
        if not 0.0 <= self.mutation_fraction <= 1.0:
            raise ConfigError(
                f"pso.mutation_fraction must lie in [0, 1], got {self.mutation_fraction}",
                field="pso.mutation_fraction",
            )
        if self.stall_window < 1:
            raise ConfigError("pso.stall_window must be >= 1", field="pso.stall_window")
        if self.stall_tolerance < 0:
            raise ConfigError("pso.stall_tolerance must be >= 0", field="pso.stall_tolerance")
        if self.c1 + self.c2 >= 4:
            log.warning("c1 + c2 = %.2f >= 4: the swarm may not converge", self.c1 + self.c2)
        if self.initial_guess is not None:
            object.__setattr__(self, "initial_guess", tuple(float(v) for v in self.initial_guess))


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_costs: np.ndarray         # per player, cost of that player's pbest slice


@dataclass
class Swarm:
    particles: list[Particle]
    gbest_position: np.ndarray      # broadcast joint profile
    gbest_costs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    v_max: np.ndarray
    holders: list[int | None] = field(default_factory=list)
    iteration: int = 0
    stagnation: int = 0

    @property
    def size(self) -> int:
        return len(self.particles)


# ----------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------
def inertia_at(t: int, config: PsoConfig) -> float:
    """omega(t) = omega_max - (omega_max - omega_min) * t / t_max."""
    if not 0 <= t <= config.t_max:
        raise ValueError(f"iteration {t} outside 0..{config.t_max}")
    if t == config.t_max:
        return config.omega_min
    return config.omega_max - (config.omega_max - config.omega_min) * t / config.t_max


def velocity_limit(config: PsoConfig, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    if config.v_max is not None:
        return np.full(lower.shape, float(config.v_max))
    return 0.2 * (upper - lower)


def update_velocity(particle: Particle, gbest: np.ndarray, t: int, config: PsoConfig,
                    rng: np.random.Generator, v_max: np.ndarray | float | None = None,
                    active: slice | None = None) -> np.ndarray:
    """v <- omega(t) v + c1 r1 (pbest - x) + c2 r2 (gbest - x), clamped to [-v_max, v_max].

    Only the active slice moves. r1 and r2 are scalars unless
    per_dimension_random is set.
    """
    active = active or slice(0, particle.position.size)
    x = particle.position[active]
    size = x.size if config.per_dimension_random else None
    r1 = rng.random(size)
    r2 = rng.random(size)
    v = (
        inertia_at(t, config) * particle.velocity[active]
        + config.c1 * r1 * (particle.pbest_position[active] - x)
        + config.c2 * r2 * (gbest[active] - x)
    )
    if v_max is None:
        v_max = math.inf if config.v_max is None else config.v_max
    limit = np.broadcast_to(v_max, particle.velocity.shape)[active]
    particle.velocity[active] = np.clip(v, -limit, limit)
    return particle.velocity


def update_position(particle: Particle, active: slice | None = None) -> np.ndarray:
    """x <- x + v. Positions may leave the bounds; costs are taken at the clamped point."""
    active = active or slice(0, particle.position.size)
    particle.position[active] = particle.position[active] + particle.velocity[active]
    return particle.position


def hybrid_refine(position: np.ndarray, player: int, evaluator: CostEvaluator, others_best: np.ndarray,
                  hybrid_iter: int, simplex: SimplexConfig = SimplexConfig()) -> tuple[np.ndarray, float]:
    """Simplex refinement of one player's slice against frozen opponents.

    Returns the refined slice (inside the bounds) and its cost, never worse
    than the input. On a local-search failure the input is returned.
    """
    active = variable_layout(evaluator.game, evaluator.mode)[player]
    lower, upper = evaluator.lower[active], evaluator.upper[active]

    def objective(values: np.ndarray) -> float:
        return evaluator.cost(splice(others_best, active, values), player)

    start = np.clip(position, lower, upper)
    try:
        found = simplex_minimize(clamped(objective, lower, upper), start, simplex, max_iterations=hybrid_iter)
    except (ArithmeticError, ValueError) as e:
        log.warning("Local search failed for player %d, keeping the unrefined position: %s", player, e)
        return start, objective(start)
    return np.clip(found.point, lower, upper), found.value


def stagnation_mutate(swarm: Swarm, config: PsoConfig, rng: np.random.Generator) -> Swarm:
    """Re-seed ceil(fraction * S) particles that hold no gbest; velocities are zeroed."""
    if swarm.stagnation < config.stagnation_window:
        return swarm
    count = math.ceil(config.mutation_fraction * swarm.size)
    protected = {h for h in swarm.holders if h is not None}
    candidates = [j for j in range(swarm.size) if j not in protected]
    count = min(count, len(candidates))
    if count:
        chosen = np.sort(rng.choice(np.array(candidates), size=count, replace=False))
        for j in chosen:
            p = swarm.particles[int(j)]
            p.position = rng.uniform(swarm.lower, swarm.upper)
            p.velocity = np.zeros_like(p.position)
        log.debug("Stagnation mutation at iteration %d re-seeded %d particles", swarm.iteration, count)
    swarm.stagnation = 0
    return swarm


# ----------------------------------------------------------------------
# Driver
# ----------------------------------------------------------------------
def init_swarm(evaluator: CostEvaluator, config: PsoConfig, rng: np.random.Generator) -> Swarm:
    lower, upper = evaluator.lower, evaluator.upper
    n = evaluator.game.num_players
    particles = []
    for j in range(config.swarm_size):
        x = rng.uniform(lower, upper)
        if j == 0 and config.initial_guess is not None:
            if len(config.initial_guess) != lower.size:
                raise ConfigError(
                    f"pso.initial_guess has {len(config.initial_guess)} values, the game needs {lower.size}",
                    field="pso.initial_guess",
                )
            x = evaluator.clamp(np.array(config.initial_guess))
        particles.append(Particle(x, np.zeros_like(x), x.copy(), np.full(n, math.inf)))
    return Swarm(
        particles=particles,
        gbest_position=particles[0].position.copy(),
        gbest_costs=np.full(n, math.inf),
        lower=lower,
        upper=upper,
        v_max=velocity_limit(config, lower, upper),
        holders=[None] * n,
    )


def _refresh_player(swarm: Swarm, evaluator: CostEvaluator, player: int, active: slice):
    """Opponents moved: re-evaluate the player's pbest and gbest costs under the new profile."""
    base = swarm.gbest_position
    vectors = [splice(base, active, p.pbest_position[active]) for p in swarm.particles]
    costs = evaluator.costs(vectors, player)
    for p, c in zip(swarm.particles, costs):
        p.pbest_costs[player] = c
    swarm.gbest_costs[player] = evaluator.cost(base, player)
    k = int(np.argmin(costs))
    if costs[k] < swarm.gbest_costs[player]:
        swarm.gbest_position[active] = swarm.particles[k].pbest_position[active]
        swarm.gbest_costs[player] = costs[k]
        swarm.holders[player] = k


def pso_step(swarm: Swarm, evaluator: CostEvaluator, player: int, config: PsoConfig,
             rng: np.random.Generator, simplex: SimplexConfig = SimplexConfig()) -> tuple[float, bool]:
    """Move and evaluate player `player`'s slices; returns (mean cost, gbest improved)."""
    active = variable_layout(evaluator.game, evaluator.mode)[player]
    base = swarm.gbest_position
    for p in swarm.particles:
        update_velocity(p, base, swarm.iteration, config, rng, swarm.v_max, active)
        update_position(p, active)

    costs = evaluator.costs([splice(base, active, p.position[active]) for p in swarm.particles], player)
    if config.hybrid_iter > 0:
        targets = range(swarm.size) if config.hybrid_scope == "all" else [int(np.argmin(costs))]
        for j in targets:
            p = swarm.particles[j]
            refined, cost = hybrid_refine(p.position[active], player, evaluator, base, config.hybrid_iter, simplex)
            if cost <= costs[j]:
                p.position[active] = refined
                costs[j] = cost

    for p, c in zip(swarm.particles, costs):
        if c < p.pbest_costs[player]:
            p.pbest_position[active] = p.position[active]
            p.pbest_costs[player] = c

    improved = False
    k = int(np.argmin(costs))
    if costs[k] < swarm.gbest_costs[player]:
        swarm.gbest_position[active] = swarm.particles[k].position[active]
        swarm.gbest_costs[player] = costs[k]
        swarm.holders[player] = k
        improved = True
    return float(np.mean(costs)), improved


def run_pso(game: DynamicGame, config: PsoConfig = PsoConfig(),
            mode: StrategyMode = StrategyMode.OPEN_LOOP, bus: EventBus | None = None,
            workers: int = 1, simplex: SimplexConfig = SimplexConfig()) -> SolveResult:
    """Iterate co-evolutionary sweeps until t_max or until every player's best cost has stalled."""
    mode = StrategyMode(mode)
    solver = "hybrid_pso" if config.hybrid_iter > 0 else "pso"
    started = time.perf_counter()
    rng = np.random.default_rng(config.rng_seed)
    trace: list[TraceRow] = []
    strategies: list[np.ndarray] = []
    history: list[np.ndarray] = []
    stop_reason = "t_max"

    log.info(
        "%s start: game=%s players=%d mode=%s swarm=%d seed=%d",
        solver, game.name, game.num_players, mode.value, config.swarm_size, config.rng_seed,
    )
    if bus:
        bus.emit(SOLVER_STARTED, {"solver": solver, "game": game.name, "seed": config.rng_seed})

    with CostEvaluator(game, mode, workers) as evaluator:
        swarm = init_swarm(evaluator, config, rng)
        layout = variable_layout(game, mode)
        seen: list[np.ndarray | None] = [None] * game.num_players
        try:
            while swarm.iteration < config.t_max:
                means = np.zeros(game.num_players)
                improved = False
                for i, active in enumerate(layout):
                    if seen[i] is not None and not np.array_equal(seen[i], swarm.gbest_position):
                        _refresh_player(swarm, evaluator, i, active)
                    means[i], step_improved = pso_step(swarm, evaluator, i, config, rng, simplex)
                    improved = improved or step_improved
                    seen[i] = swarm.gbest_position.copy()

                swarm.iteration += 1
                swarm.stagnation = 0 if improved else swarm.stagnation + 1

                best = evaluator.clamp(swarm.gbest_position)
                costs = evaluator.all_costs(best)
                history.append(costs)
                strategies.append(best)
                for i in range(game.num_players):
                    row = TraceRow(swarm.iteration, i, float(costs[i]), float(means[i]), swarm.stagnation)
                    trace.append(row)
                    if bus:
                        bus.emit(TRACE_ROW, {"solver": solver, "row": row})
                log.debug("Iteration %d gbest costs %s", swarm.iteration, costs)

                if best_cost_stalled(history, config.stall_window, config.stall_tolerance):
                    stop_reason = "stalled"
                    break
                if config.mutation_enabled and swarm.stagnation >= config.stagnation_window:
                    if bus:
                        bus.emit(STAGNATION_MUTATION, {"solver": solver, "iteration": swarm.iteration})
                    stagnation_mutate(swarm, config, rng)
        except ModelDefectError as e:
            log.error("%s aborted at iteration %d: %s", solver, swarm.iteration + 1, e)
            raise SolverAbortedError(f"{solver} aborted: {e}", trace=trace) from e

        best = evaluator.clamp(swarm.gbest_position)
        costs = evaluator.all_costs(best)
        evaluations = evaluator.evaluations

    duration = time.perf_counter() - started
    log.info("%s finished after %d iterations (%s): costs %s", solver, swarm.iteration, stop_reason, costs)
    if bus:
        bus.emit(SOLVER_FINISHED, {"solver": solver, "iterations": swarm.iteration, "stop_reason": stop_reason})
    return SolveResult(
        solver=solver,
        profile=profile_from_vector(game, mode, best),
        costs=costs,
        trace=trace,
        seed=config.rng_seed,
        iterations=swarm.iteration,
        duration=duration,
        strategy_trace=strategies,
        stop_reason=stop_reason,
        evaluations=evaluations,
    )
