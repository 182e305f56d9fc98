"""
evaluator.py
Batched cost evaluation of joint strategy vectors.

Vectors are clamped into the variable bounds before evaluation. With
workers > 1 the batch runs on a thread pool; results keep input order, so
serial and parallel runs produce the same numbers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from nash_evo.core.game_model import (
    DynamicGame,
    StrategyMode,
    evaluate_all_costs,
    evaluate_cost,
    profile_from_vector,
    variable_bounds,
)

log = logging.getLogger("CostEvaluator")


class CostEvaluator:
    """Evaluates player costs for joint vectors of one game and strategy mode."""

    def __init__(self, game: DynamicGame, mode: StrategyMode = StrategyMode.OPEN_LOOP, workers: int = 1):
        self.game = game
        self.mode = StrategyMode(mode)
        self.lower, self.upper = variable_bounds(game, self.mode)
        self.workers = max(1, int(workers))
        self.evaluations = 0
        self._pool: ThreadPoolExecutor | None = None

    def clamp(self, vec: np.ndarray) -> np.ndarray:
        return np.clip(vec, self.lower, self.upper)

    def _cost(self, vec: np.ndarray, player: int) -> float:
        profile = profile_from_vector(self.game, self.mode, self.clamp(vec))
        return evaluate_cost(self.game, profile, player)

    def cost(self, vec: np.ndarray, player: int) -> float:
        self.evaluations += 1
        return self._cost(vec, player)

    def all_costs(self, vec: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        return evaluate_all_costs(self.game, profile_from_vector(self.game, self.mode, self.clamp(vec)))

    def costs(self, vectors: Sequence[np.ndarray], player: int) -> np.ndarray:
        # counted on the calling thread; workers only evaluate
        self.evaluations += len(vectors)
        if self.workers == 1 or len(vectors) < 2:
            return np.array([self._cost(v, player) for v in vectors], dtype=float)
        if self._pool is None:
            log.debug("Starting evaluation pool with %d workers", self.workers)
            self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="nash-eval")
        return np.array(list(self._pool.map(lambda v: self._cost(v, player), vectors)), dtype=float)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "CostEvaluator":
        return self

    def __exit__(self, *exc):
        self.close()
