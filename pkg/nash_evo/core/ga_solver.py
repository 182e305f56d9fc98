"""
ga_solver.py
Co-evolutionary genetic algorithm.

Every player owns a subpopulation of base-10 chromosomes. Within a
generation the players are updated in ascending order: player i's
candidates are evaluated against the other players' broadcast best
strategies, bred by roulette selection, one-point crossover and per-digit
mutation restricted to player i's genes, and the new best is broadcast
before player i+1 starts.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from nash_evo.core.encoding import (
    Chromosome,
    EncodingScheme,
    decode,
    encode,
    random_chromosome,
    validate_chromosome,
)
from nash_evo.core.errors import (
    ConfigError,
    DimensionError,
    EncodingRangeError,
    ModelDefectError,
    SelectionError,
    SolverAbortedError,
)
from nash_evo.core.evaluator import CostEvaluator
from nash_evo.core.event_bus import SOLVER_FINISHED, SOLVER_STARTED, TRACE_ROW, EventBus
from nash_evo.core.game_model import (
    DynamicGame,
    StrategyMode,
    profile_from_vector,
    variable_count,
    variable_layout,
)
from nash_evo.core.result import SolveResult, TraceRow, best_cost_stalled

log = logging.getLogger("GaSolver")

OFFSET_MODES = ("median", "adaptive", "fixed")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 40
    crossover_prob: float = 0.8
    mutation_prob: float = 0.05
    elitism: bool = True
    fitness_offset_mode: str = "median"
    fitness_offset: float = 0.0         # C, only read in fixed mode
    max_generations: int = 2000
    stall_window: int = 500
    stall_tolerance: float = 1e-12
    rng_seed: int = 0
    magnitude_digits: int = 6
    decimal_position: int = 1
    initial_guess: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("ga.population_size must be >= 2", field="ga.population_size")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ConfigError(
                f"ga.crossover_prob must lie in [0, 1], got {self.crossover_prob}", field="ga.crossover_prob"
            )
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError(
                f"ga.mutation_prob must lie in [0, 1] (typical 0.01-0.2), got {self.mutation_prob}",
                field="ga.mutation_prob",
            )
        if self.fitness_offset_mode not in OFFSET_MODES:
            raise ConfigError(
                f"ga.fitness_offset_mode must be one of {OFFSET_MODES}", field="ga.fitness_offset_mode"
            )
        if self.max_generations < 1:
            raise ConfigError("ga.max_generations must be >= 1", field="ga.max_generations")
        if self.stall_window < 1:
            raise ConfigError("ga.stall_window must be >= 1", field="ga.stall_window")
        if self.stall_tolerance < 0:
            raise ConfigError("ga.stall_tolerance must be >= 0", field="ga.stall_tolerance")
        if not 1 <= self.magnitude_digits <= 15:
            raise ConfigError("ga.magnitude_digits must lie in 1..15", field="ga.magnitude_digits")
        if not 0 <= self.decimal_position <= self.magnitude_digits:
            raise ConfigError(
                f"ga.decimal_position must lie in 0..{self.magnitude_digits}", field="ga.decimal_position"
            )
        if self.initial_guess is not None:
            object.__setattr__(self, "initial_guess", tuple(float(v) for v in self.initial_guess))


# ----------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------
def fitness_transform(cost: float, offset: float) -> float:
    """F = C - J. Positivity is the caller's business (see selection_fitness)."""
    return offset - cost


def adaptive_offset(costs: np.ndarray) -> float:
    """C = max J + 10% of |max J| + 1, so that every fitness is at least 1."""
    worst = float(np.max(costs))
    return worst + 0.1 * abs(worst) + 1.0


def median_offset(costs: np.ndarray) -> float:
    """C = median J plus a 1e-9 relative margin. Costs above C get zero fitness (see selection_fitness)."""
    middle = float(np.median(costs))
    return middle + 1e-9 * (1.0 + abs(middle))


def selection_fitness(costs: np.ndarray, config: GaConfig) -> tuple[np.ndarray, float]:
    """Roulette weights and the offset C used for them.

    In median mode the worse half of the subpopulation is never selected and
    the better half is weighted by its distance below the median. Fixed mode
    passes C - J through unclipped, so a too small C still fails selection.
    """
    if config.fitness_offset_mode == "median":
        offset = median_offset(costs)
        return np.maximum(fitness_transform(costs, offset), 0.0), offset
    if config.fitness_offset_mode == "adaptive":
        offset = adaptive_offset(costs)
    else:
        offset = config.fitness_offset
    return fitness_transform(costs, offset), offset


def roulette_select(fitnesses: np.ndarray, rng: np.random.Generator) -> int:
    """Index i drawn with probability F_i / sum(F)."""
    f = np.asarray(fitnesses, dtype=float)
    if f.size == 0:
        raise SelectionError("roulette selection needs at least one candidate")
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise SelectionError("negative or non-finite fitness in roulette selection; recalibrate the fitness offset C")
    cum = np.cumsum(f)
    if cum[-1] <= 0:
        raise SelectionError("all fitness values are zero; recalibrate the fitness offset C")
    r = rng.random() * cum[-1]
    return min(int(np.searchsorted(cum, r, side="right")), f.size - 1)


def one_point_crossover(parent_a: Chromosome, parent_b: Chromosome, rng: np.random.Generator,
                        segment: slice | None = None) -> tuple[Chromosome, Chromosome]:
    """Swap the tails of the segment after a cut drawn uniformly over its interior positions."""
    if parent_a.shape != parent_b.shape:
        raise DimensionError(f"crossover parents differ in length: {parent_a.size} vs {parent_b.size}")
    start, stop = (0, parent_a.size) if segment is None else (segment.start, segment.stop)
    child_a, child_b = parent_a.copy(), parent_b.copy()
    if stop - start < 2:
        return child_a, child_b
    cut = int(rng.integers(start + 1, stop))
    child_a[cut:stop] = parent_b[cut:stop]
    child_b[cut:stop] = parent_a[cut:stop]
    return child_a, child_b


def mutate(chromosome: Chromosome, scheme: EncodingScheme, active_slice: slice, p_m: float,
           rng: np.random.Generator) -> Chromosome:
    """Resample each digit of active_slice uniformly over 0..9 with probability p_m."""
    validate_chromosome(chromosome, scheme)
    out = chromosome.copy()
    segment = out[active_slice]
    # draw the mask and the digits every time so the stream does not depend on p_m hits
    hits = rng.random(segment.size) < p_m
    digits = rng.integers(0, 10, segment.size, dtype=np.int8)
    segment[hits] = digits[hits]
    out[active_slice] = segment
    return out


# ----------------------------------------------------------------------
# State
# ----------------------------------------------------------------------
@dataclass
class GaState:
    """Subpopulations (full-length chromosomes, one array per player) and the broadcast bests."""

    scheme: EncodingScheme
    populations: list[np.ndarray]
    best_genes: Chromosome
    rng: np.random.Generator
    mode: StrategyMode = StrategyMode.OPEN_LOOP
    generation: int = 0
    history: list[np.ndarray] = field(default_factory=list)
    stagnation: np.ndarray | None = None
    mean_costs: np.ndarray | None = None
    elite_costs: np.ndarray | None = None
    offsets: np.ndarray | None = None

    @property
    def num_players(self) -> int:
        return len(self.populations)

    @property
    def best_vector(self) -> np.ndarray:
        return decode(self.best_genes, self.scheme)


def init_ga_state(game: DynamicGame, config: GaConfig,
                  mode: StrategyMode = StrategyMode.OPEN_LOOP) -> GaState:
    """Random subpopulations inside the variable bounds; member 0 holds the initial guess if one is set."""
    rng = np.random.default_rng(config.rng_seed)
    scheme = EncodingScheme(
        config.magnitude_digits, config.decimal_position,
        variable_count(game, mode), variable_layout(game, mode),
    )
    evaluator = CostEvaluator(game, mode)
    try:
        guess = None
        if config.initial_guess is not None:
            if len(config.initial_guess) != scheme.variable_count:
                raise ConfigError(
                    f"ga.initial_guess has {len(config.initial_guess)} values, the game needs {scheme.variable_count}",
                    field="ga.initial_guess",
                )
            guess = encode(evaluator.clamp(np.array(config.initial_guess)), scheme)
        populations = []
        for _ in range(game.num_players):
            pop = np.stack([
                random_chromosome(scheme, evaluator.lower, evaluator.upper, rng)
                for _ in range(config.population_size)
            ])
            if guess is not None:
                pop[0] = guess
            populations.append(pop)
    except EncodingRangeError as e:
        raise ConfigError(
            f"encoding ({config.magnitude_digits} digits, point after {config.decimal_position}) "
            f"cannot represent the variable bounds: {e}",
            field="ga.magnitude_digits",
        ) from e

    best = np.empty(scheme.length, dtype=np.int8)
    for i, pop in enumerate(populations):
        genes = scheme.player_genes(i)
        best[genes] = pop[0, genes]

    n = game.num_players
    return GaState(
        scheme=scheme,
        populations=populations,
        best_genes=best,
        rng=rng,
        mode=mode,
        stagnation=np.zeros(n, dtype=int),
        mean_costs=np.zeros(n),
        elite_costs=np.zeros(n),
        offsets=np.zeros(n),
    )


# ----------------------------------------------------------------------
# Generation
# ----------------------------------------------------------------------
def _breed(state: GaState, player: int, fitness: np.ndarray, config: GaConfig) -> np.ndarray:
    pop, rng, scheme = state.populations[player], state.rng, state.scheme
    genes = scheme.player_genes(player)
    size = pop.shape[0]
    offspring = []
    if config.elitism:
        offspring.append(state.best_genes.copy())
    while len(offspring) < size:
        a = pop[roulette_select(fitness, rng)]
        b = pop[roulette_select(fitness, rng)]
        if rng.random() < config.crossover_prob:
            a, b = one_point_crossover(a, b, rng, genes)
        offspring.append(mutate(a, scheme, genes, config.mutation_prob, rng))
        if len(offspring) < size:
            offspring.append(mutate(b, scheme, genes, config.mutation_prob, rng))
    return np.stack(offspring)


def coevolve_generation(game: DynamicGame, state: GaState, config: GaConfig,
                        evaluator: CostEvaluator | None = None) -> GaState:
    """One co-evolutionary sweep over all players, in ascending order."""
    evaluator = evaluator or CostEvaluator(game, state.mode)
    scheme = state.scheme
    for i in range(state.num_players):
        genes = scheme.player_genes(i)
        pop = state.populations[i]

        # freeze the opponents at their broadcast bests
        inactive = np.ones(scheme.length, dtype=bool)
        inactive[genes] = False
        pop[:, inactive] = state.best_genes[inactive]

        try:
            costs = evaluator.costs([decode(c, scheme) for c in pop], i)
            if config.elitism:
                elite_cost = float(costs[0])
            else:
                elite_cost = evaluator.cost(state.best_vector, i)
        except ModelDefectError as e:
            raise ModelDefectError(f"generation {state.generation + 1}, player {i}: {e}") from e

        k = int(np.argmin(costs))
        if costs[k] < elite_cost:
            state.best_genes[genes] = pop[k, genes]
            state.stagnation[i] = 0
        else:
            state.stagnation[i] += 1

        fitness, offset = selection_fitness(costs, config)

        state.mean_costs[i] = float(np.mean(costs))
        state.elite_costs[i] = elite_cost
        state.offsets[i] = offset
        state.populations[i] = _breed(state, i, fitness, config)

    state.generation += 1
    return state


# ----------------------------------------------------------------------
# Driver
# ----------------------------------------------------------------------
def run_ga(game: DynamicGame, config: GaConfig = GaConfig(),
           mode: StrategyMode = StrategyMode.OPEN_LOOP,
           bus: EventBus | None = None, workers: int = 1) -> SolveResult:
    """Iterate generations until max_generations or until every player's best cost has stalled."""
    mode = StrategyMode(mode)
    started = time.perf_counter()
    state = init_ga_state(game, config, mode)
    trace: list[TraceRow] = []
    strategies: list[np.ndarray] = []
    stop_reason = "max_generations"

    log.info(
        "GA start: game=%s players=%d mode=%s population=%d seed=%d",
        game.name, game.num_players, mode.value, config.population_size, config.rng_seed,
    )
    if bus:
        bus.emit(SOLVER_STARTED, {"solver": "ga", "game": game.name, "seed": config.rng_seed})

    with CostEvaluator(game, mode, workers) as evaluator:
        try:
            while state.generation < config.max_generations:
                coevolve_generation(game, state, config, evaluator)
                best = evaluator.clamp(state.best_vector)
                costs = evaluator.all_costs(best)
                state.history.append(costs)
                strategies.append(best)
                for i in range(game.num_players):
                    row = TraceRow(
                        iteration=state.generation,
                        player=i,
                        best_cost=float(costs[i]),
                        mean_cost=float(state.mean_costs[i]),
                        stagnation=int(state.stagnation[i]),
                        elite_cost=float(state.elite_costs[i]),
                        fitness_offset=float(state.offsets[i]),
                    )
                    trace.append(row)
                    if bus:
                        bus.emit(TRACE_ROW, {"solver": "ga", "row": row})
                log.debug("Generation %d best costs %s", state.generation, costs)
                if best_cost_stalled(state.history, config.stall_window, config.stall_tolerance):
                    stop_reason = "stalled"
                    break
        except ModelDefectError as e:
            log.error("GA aborted at generation %d: %s", state.generation + 1, e)
            raise SolverAbortedError(f"GA aborted: {e}", trace=trace) from e

        best = evaluator.clamp(state.best_vector)
        costs = evaluator.all_costs(best)
        evaluations = evaluator.evaluations

    duration = time.perf_counter() - started
    log.info("GA finished after %d generations (%s): costs %s", state.generation, stop_reason, costs)
    if bus:
        bus.emit(SOLVER_FINISHED, {"solver": "ga", "iterations": state.generation, "stop_reason": stop_reason})
    return SolveResult(
        solver="ga",
        profile=profile_from_vector(game, mode, best),
        costs=costs,
        trace=trace,
        seed=config.rng_seed,
        iterations=state.generation,
        duration=duration,
        strategy_trace=strategies,
        stop_reason=stop_reason,
        evaluations=evaluations,
    )
