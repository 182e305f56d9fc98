"""
local_search.py
Derivative-free simplex (Nelder-Mead) minimizer.

Used by hybrid PSO refinement and by the best-response verifier. The
routine is unconstrained; callers wrap objectives with `clamped` to search
inside box bounds. No randomness: equal inputs give equal outputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from nash_evo.core.errors import ConfigError, ModelDefectError

log = logging.getLogger("LocalSearch")

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class SimplexConfig:
    max_iterations: int = 200
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_scale: float = 0.05     # per-axis step = max(initial_scale * |x_j|, min_step)
    min_step: float = 0.025
    xtol: float = 1e-8              # simplex diameter (max-norm distance to best vertex)
    ftol: float = 1e-12             # value spread across vertices

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigError("local_search.max_iterations must be >= 0", field="local_search.max_iterations")
        if not self.reflection > 0:
            raise ConfigError("local_search.reflection must be > 0", field="local_search.reflection")
        if not self.expansion > 1:
            raise ConfigError("local_search.expansion must be > 1", field="local_search.expansion")
        if not 0 < self.contraction < 1:
            raise ConfigError("local_search.contraction must lie in (0, 1)", field="local_search.contraction")
        if not 0 < self.shrink < 1:
            raise ConfigError("local_search.shrink must lie in (0, 1)", field="local_search.shrink")
        if not self.initial_scale > 0 or not self.min_step > 0:
            raise ConfigError("local_search.initial_scale and min_step must be > 0", field="local_search.initial_scale")
        if self.xtol < 0 or self.ftol < 0:
            raise ConfigError("local_search tolerances must be >= 0", field="local_search.xtol")


class SimplexResult(NamedTuple):
    point: np.ndarray
    value: float
    iterations: int
    evaluations: int
    best_history: tuple[float, ...] = ()


def clamped(objective: Objective, lower: np.ndarray, upper: np.ndarray) -> Objective:
    """Objective evaluated at the query point clipped into [lower, upper]."""
    return lambda x: objective(np.clip(x, lower, upper))


def simplex_minimize(objective: Objective, start: np.ndarray,
                     config: SimplexConfig = SimplexConfig(),
                     max_iterations: int | None = None) -> SimplexResult:
    """Minimize `objective` from `start`.

    Stops after max_iterations, when all vertices of the start simplex share
    one value, or when both the simplex diameter and the value spread are
    within tolerance.
    Non-finite values away from the start count as +inf.
    """
    budget = config.max_iterations if max_iterations is None else int(max_iterations)
    x0 = np.array(start, dtype=float).reshape(-1)
    dim = x0.size
    evaluations = 0

    def f(x: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        try:
            value = float(objective(x))
        except ArithmeticError:
            return math.inf
        return value if math.isfinite(value) else math.inf

    f0 = f(x0)
    if not math.isfinite(f0):
        raise ModelDefectError("objective is not finite at the simplex start point")
    if dim == 0 or budget == 0:
        return SimplexResult(x0, f0, 0, evaluations, (f0,))

    steps = np.maximum(config.initial_scale * np.abs(x0), config.min_step)
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    values = np.array([f0] + [f(v) for v in simplex[1:]])

    alpha, gamma = config.reflection, config.expansion
    rho, sigma = config.contraction, config.shrink
    history = []
    iterations = 0
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        history.append(float(values[0]))

        spread = values[-1] - values[0]
        diameter = float(np.abs(simplex[1:] - simplex[0]).max())
        # a flat start simplex ends the search; later ties are left to the tolerances
        if (iterations == 0 and spread == 0) or (diameter <= config.xtol and spread <= config.ftol):
            break
        if iterations >= budget:
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue

        if fr < values[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            accept = fc <= fr
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            accept = fc < values[-1]
        if accept:
            simplex[-1], values[-1] = xc, fc
            continue

        # shrink towards the best vertex
        best = simplex[0]
        simplex[1:] = best + sigma * (simplex[1:] - best)
        values[1:] = [f(v) for v in simplex[1:]]

    return SimplexResult(simplex[0].copy(), float(values[0]), iterations, evaluations, tuple(history))
