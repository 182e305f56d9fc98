import dataclasses

import numpy as np
import pytest

from nash_evo.core.encoding import EncodingScheme
from nash_evo.core.errors import ConfigError, DimensionError, SelectionError, SolverAbortedError
from nash_evo.core.evaluator import CostEvaluator
from nash_evo.core.event_bus import SOLVER_FINISHED, TRACE_ROW, EventBus
from nash_evo.core.ga_solver import (
    GaConfig,
    adaptive_offset,
    coevolve_generation,
    fitness_transform,
    init_ga_state,
    median_offset,
    mutate,
    one_point_crossover,
    roulette_select,
    run_ga,
    selection_fitness,
)
from nash_evo.core.game_model import StrategyMode

from conftest import make_game


# ----------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------
def test_fitness_transform():
    assert fitness_transform(0.0, 100.0) == 100.0
    assert fitness_transform(7.5, 7.5) == 0.0
    costs = np.array([3.0, -1.0, 2.5])
    assert np.argmax(fitness_transform(costs, 42.0)) == np.argmin(costs)


def test_adaptive_offset_keeps_fitness_positive():
    for costs in ([1.0, 2.0, 3.0], [-5.0, -1.0], [0.0, 0.0], [-3.0, 10.0]):
        costs = np.array(costs)
        assert np.all(fitness_transform(costs, adaptive_offset(costs)) >= 1.0)


def test_median_offset_drops_the_worse_half():
    costs = np.array([4.0, 1.0, 3.0, 2.0, 50.0])
    fitness, offset = selection_fitness(costs, GaConfig())
    assert offset == pytest.approx(3.0)
    assert np.all(fitness >= 0.0)
    np.testing.assert_array_equal(fitness[[0, 4]], [0.0, 0.0])
    assert np.argmax(fitness) == 1
    # a far outlier does not flatten the weights of the better members
    assert fitness[1] / fitness[3] == pytest.approx(2.0, rel=1e-6)


def test_median_offset_with_tied_costs():
    fitness, offset = selection_fitness(np.zeros(6), GaConfig())
    assert offset == median_offset(np.zeros(6)) > 0.0
    assert np.all(fitness == fitness[0]) and fitness[0] > 0.0
    assert roulette_select(fitness, np.random.default_rng(0)) in range(6)


def test_fixed_offset_is_not_clipped():
    fitness, offset = selection_fitness(np.array([1.0, 5.0]), GaConfig(fitness_offset_mode="fixed", fitness_offset=2.0))
    assert offset == 2.0
    np.testing.assert_array_equal(fitness, [1.0, -3.0])


def test_roulette_trivial_cases():
    rng = np.random.default_rng(0)
    assert roulette_select([2.5], rng) == 0
    assert all(roulette_select([4.0, 0.0], rng) == 0 for _ in range(1000))


def test_roulette_frequencies():
    rng = np.random.default_rng(123)
    draws = [roulette_select([3.0, 1.0], rng) for _ in range(100_000)]
    assert abs(draws.count(0) / len(draws) - 0.75) <= 0.01


def test_roulette_rejects_bad_fitness():
    rng = np.random.default_rng(0)
    with pytest.raises(SelectionError, match="offset"):
        roulette_select([1.0, -0.5], rng)
    with pytest.raises(SelectionError, match="offset"):
        roulette_select([0.0, 0.0], rng)


def test_crossover_exchange_property():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 10, 20).astype(np.int8)
    b = rng.integers(0, 10, 20).astype(np.int8)
    for _ in range(50):
        ca, cb = one_point_crossover(a, b, rng)
        cut = next((j for j in range(20) if ca[j] != a[j]), 20)
        np.testing.assert_array_equal(ca[:cut], a[:cut])
        np.testing.assert_array_equal(ca[cut:], b[cut:])
        np.testing.assert_array_equal(cb[cut:], a[cut:])
        np.testing.assert_array_equal(np.sort(np.stack([ca, cb]), axis=0), np.sort(np.stack([a, b]), axis=0))


def test_crossover_identical_parents_and_segment():
    rng = np.random.default_rng(2)
    a = np.arange(10, dtype=np.int8)
    ca, cb = one_point_crossover(a, a.copy(), rng)
    np.testing.assert_array_equal(ca, a)
    np.testing.assert_array_equal(cb, a)

    b = np.full(10, 9, dtype=np.int8)
    for _ in range(50):
        ca, _ = one_point_crossover(a, b, rng, slice(3, 7))
        np.testing.assert_array_equal(ca[:4], a[:4])
        np.testing.assert_array_equal(ca[7:], a[7:])


def test_crossover_length_mismatch():
    with pytest.raises(DimensionError):
        one_point_crossover(np.zeros(4, np.int8), np.zeros(5, np.int8), np.random.default_rng(0))


def test_mutation_masking():
    scheme = EncodingScheme(3, 1, 4, (slice(0, 2), slice(2, 4)))
    rng = np.random.default_rng(3)
    chrom = rng.integers(0, 10, scheme.length).astype(np.int8)
    active = scheme.player_genes(1)
    for _ in range(100):
        out = mutate(chrom, scheme, active, 1.0, rng)
        np.testing.assert_array_equal(out[:active.start], chrom[:active.start])
    np.testing.assert_array_equal(mutate(chrom, scheme, active, 0.0, rng), chrom)


def test_mutation_is_uniform_at_full_rate():
    stats = pytest.importorskip("scipy.stats")
    scheme = EncodingScheme(3, 1, 1)
    rng = np.random.default_rng(4)
    chrom = np.zeros(scheme.length, dtype=np.int8)
    draws = np.stack([mutate(chrom, scheme, slice(0, 4), 1.0, rng) for _ in range(10_000)])
    for position in range(4):
        counts = np.bincount(draws[:, position], minlength=10)
        assert stats.chisquare(counts).pvalue > 0.01


def test_config_validation():
    with pytest.raises(ConfigError, match="mutation_prob"):
        GaConfig(mutation_prob=1.5)
    with pytest.raises(ConfigError):
        GaConfig(population_size=1)
    with pytest.raises(ConfigError):
        GaConfig(max_generations=0)
    with pytest.raises(ConfigError):
        GaConfig(fitness_offset_mode="rank")


# ----------------------------------------------------------------------
# Generations and runs
# ----------------------------------------------------------------------
def test_single_player_ga_reaches_target(target_game):
    config = GaConfig(max_generations=200, rng_seed=5)
    result = run_ga(target_game, config)
    step = 10.0 ** (config.decimal_position - config.magnitude_digits)
    assert abs(result.profile.controls[0][0, 0] - 2.0) <= step + 1e-2


def test_single_player_best_cost_non_increasing(target_game):
    result = run_ga(target_game, GaConfig(max_generations=150, rng_seed=11))
    best = [row.best_cost for row in result.trace]
    assert all(b <= a for a, b in zip(best, best[1:]))


def test_step_best_never_above_elite(hand_game):
    result = run_ga(hand_game, GaConfig(max_generations=100, rng_seed=2))
    # the last player's opponents do not move after its step
    last = [row for row in result.trace if row.player == hand_game.num_players - 1]
    assert all(row.best_cost <= row.elite_cost for row in last)


def test_coevolution_keeps_other_players_frozen(hand_game):
    config = GaConfig(population_size=10, rng_seed=3)
    state = init_ga_state(hand_game, config)
    before = state.best_genes.copy()
    genes0, genes1 = state.scheme.player_genes(0), state.scheme.player_genes(1)
    coevolve_generation(hand_game, state, config, CostEvaluator(hand_game))
    assert state.generation == 1
    # each subpopulation carries the opponents' bests as they were during its step
    assert np.all(state.populations[0][:, genes1] == before[genes1])
    assert np.all(state.populations[1][:, genes0] == state.best_genes[genes0])


def test_generation_defaults_to_the_state_mode(hand_game):
    config = GaConfig(population_size=10, rng_seed=6)
    implicit = init_ga_state(hand_game, config, StrategyMode.FEEDBACK)
    explicit = init_ga_state(hand_game, config, StrategyMode.FEEDBACK)
    assert implicit.mode is StrategyMode.FEEDBACK
    coevolve_generation(hand_game, implicit, config)
    coevolve_generation(hand_game, explicit, config, CostEvaluator(hand_game, StrategyMode.FEEDBACK))
    np.testing.assert_array_equal(implicit.best_genes, explicit.best_genes)
    np.testing.assert_array_equal(implicit.elite_costs, explicit.elite_costs)


def test_fitness_offsets_positive_in_adaptive_mode(hand_game):
    result = run_ga(hand_game, GaConfig(max_generations=50, rng_seed=8, fitness_offset_mode="adaptive"))
    for row in result.trace:
        assert row.fitness_offset > row.mean_cost


def test_zero_cost_game_is_fine(zero_cost_game):
    result = run_ga(zero_cost_game, GaConfig(max_generations=5))
    np.testing.assert_array_equal(result.costs, [0.0, 0.0])


def test_one_generation_stop(hand_game):
    result = run_ga(hand_game, GaConfig(max_generations=1))
    assert result.iterations == 1
    assert {row.iteration for row in result.trace} == {1}
    assert len(result.trace) == 2


def test_stall_stopping(zero_cost_game):
    result = run_ga(zero_cost_game, GaConfig(max_generations=500, stall_window=10))
    assert result.stop_reason == "stalled"
    assert result.iterations == 10


def test_equal_seeds_identical_traces(hand_game):
    config = GaConfig(max_generations=40, rng_seed=21)
    a, b = run_ga(hand_game, config), run_ga(hand_game, config)
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.costs, b.costs)


def test_parallel_evaluation_is_identical(hand_game):
    config = GaConfig(max_generations=30, rng_seed=4)
    assert run_ga(hand_game, config).trace == run_ga(hand_game, config, workers=4).trace


@pytest.mark.slow
def test_hand_game_nash(hand_game):
    result = run_ga(hand_game, GaConfig(rng_seed=0))
    np.testing.assert_allclose(result.profile.controls[0][0], [-1 / 3], atol=1e-2)
    np.testing.assert_allclose(result.profile.controls[1][0], [-1 / 3], atol=1e-2)


def test_initial_guess_seeds_population(hand_game):
    config = GaConfig(max_generations=1, initial_guess=(-0.33333, -0.33333), rng_seed=9)
    result = run_ga(hand_game, config)
    np.testing.assert_allclose(result.costs, [2 / 9, 2 / 9], atol=1e-4)
    with pytest.raises(ConfigError, match="initial_guess"):
        run_ga(hand_game, dataclasses.replace(config, initial_guess=(0.0,)))


def test_feedback_mode_runs(hand_game):
    result = run_ga(hand_game, GaConfig(max_generations=20, population_size=10), mode=StrategyMode.FEEDBACK)
    assert result.profile.mode is StrategyMode.FEEDBACK
    assert result.profile.gains[0].shape == (1, 1, 1)


def test_events_and_abort():
    bus = EventBus()
    rows, done = [], []
    bus.subscribe(TRACE_ROW, rows.append)
    bus.subscribe(SOLVER_FINISHED, done.append)
    game = make_game(1, 1, lambda k, x, us: x + us[0], [lambda k, x, us: float((us[0][0] - 1) ** 2)])
    run_ga(game, GaConfig(max_generations=3), bus=bus)
    assert len(rows) == 3 and len(done) == 1

    bad = make_game(1, 1, lambda k, x, us: x + us[0],
                    [lambda k, x, us: float("inf") if us[0][0] > 4.0 else 0.0])
    with pytest.raises(SolverAbortedError) as err:
        run_ga(bad, GaConfig(max_generations=50, population_size=40, rng_seed=0))
    assert isinstance(err.value.trace, list)


def test_fixed_offset_too_small_is_reported(hand_game):
    with pytest.raises(SelectionError):
        run_ga(hand_game, GaConfig(fitness_offset_mode="fixed", fitness_offset=-100.0, max_generations=3))
