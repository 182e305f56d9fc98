"""
result.py
Solver outputs: convergence trace rows and the SolveResult bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from nash_evo.core.game_model import StrategyProfile

TRACE_HEADER = ("iteration", "player", "best_cost", "mean_cost", "stagnation")


@dataclass(frozen=True)
class TraceRow:
    """One (iteration, player) row of a convergence trace.

    best_cost is the player's cost at the broadcast profile after the
    iteration's full sweep. elite_cost is the cost of the player's stored
    best re-evaluated against the opponents frozen for its step; the step
    never ends above it. fitness_offset is the GA's roulette offset C.
    """

    iteration: int
    player: int
    best_cost: float
    mean_cost: float
    stagnation: int
    elite_cost: float | None = None
    fitness_offset: float | None = None


@dataclass
class SolveResult:
    solver: str
    profile: StrategyProfile
    costs: np.ndarray
    trace: list[TraceRow]
    seed: int
    iterations: int
    duration: float = 0.0
    report: Any = None
    strategy_trace: list[np.ndarray] = field(default_factory=list)
    stop_reason: str = ""
    evaluations: int = 0

    def final_rows(self) -> list[TraceRow]:
        if not self.trace:
            return []
        last = self.trace[-1].iteration
        return [row for row in self.trace if row.iteration == last]


def best_cost_stalled(history: list[np.ndarray], window: int, tolerance: float) -> bool:
    """True once every player's best cost moved by less than tolerance over the last `window` iterations."""
    if len(history) < window:
        return False
    recent = np.asarray(history[-window:])
    return bool(np.all(recent.max(axis=0) - recent.min(axis=0) < tolerance))
