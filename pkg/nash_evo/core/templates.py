"""
templates.py
Game builders and the built-in template registry.

- build_lq_game: linear dynamics, quadratic per-player costs
- build_two_player_nonquadratic: scalar two-player game with quartic control
  and exponential state penalties
- register_game / build_game: name -> factory registry used by the config layer
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from nash_evo.core.errors import GameSpecError
from nash_evo.core.game_model import DynamicGame

log = logging.getLogger("GameTemplates")

_SYM_TOL = 1e-10


# ----------------------------------------------------------------------
# Linear-quadratic games
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LqSpec:
    """Parameters of an LQ game.

    x_{k+1} = A_k x_k + sum_i B_{i,k} u_{i,k}
    J_i = sum_k [x_{k+1}' Q_i x_{k+1} + u_{i,k}' R_i u_{i,k}] + x_K' Qf_i x_K

    The state weight applies to the state each stage's controls produce, so a
    one-stage game has J_i = x_1' Q_i x_1 + u_i' R_i u_i (+ terminal term).
    """

    a_matrices: tuple[np.ndarray, ...]
    b_matrices: tuple[tuple[np.ndarray, ...], ...]
    state_weights: tuple[np.ndarray, ...]
    control_weights: tuple[np.ndarray, ...]
    terminal_weights: tuple[np.ndarray, ...]
    initial_state: np.ndarray
    horizon: int
    control_bound: float = 5.0

    @property
    def num_players(self) -> int:
        return len(self.b_matrices)

    @property
    def state_dim(self) -> int:
        return int(self.initial_state.size)

    @property
    def control_dims(self) -> tuple[int, ...]:
        return tuple(int(np.atleast_2d(r).shape[0]) for r in self.control_weights)

    @classmethod
    def from_params(cls, a: Any, b: Sequence[Any], q: Sequence[Any], r: Sequence[Any],
                    x0: Any, horizon: int, qf: Sequence[Any] | None = None,
                    control_bound: float = 5.0) -> "LqSpec":
        """Normalize user parameters.

        a may be one matrix (time-invariant) or a list of K matrices; each
        b[i] likewise. Scalars are read as 1x1 matrices.
        """
        horizon = int(horizon)
        x0 = np.atleast_1d(np.array(x0, dtype=float)).reshape(-1)
        n = x0.size

        def per_stage(value: Any, what: str) -> tuple[np.ndarray, ...]:
            arr = np.array(value, dtype=float)
            if arr.ndim <= 2:
                return tuple(np.atleast_2d(arr) for _ in range(horizon))
            if arr.shape[0] != horizon:
                raise GameSpecError(f"{what}: {arr.shape[0]} stage matrices given, horizon is {horizon}")
            return tuple(np.atleast_2d(m) for m in arr)

        a_mats = per_stage(a, "A")
        b_mats = tuple(per_stage(bi, f"B[{i}]") for i, bi in enumerate(b))
        if len(q) != len(b) or len(r) != len(b):
            raise GameSpecError(f"{len(b)} players need {len(b)} state weights and control weights")
        q_mats = tuple(np.atleast_2d(np.array(qi, dtype=float)) for qi in q)
        r_mats = tuple(np.atleast_2d(np.array(ri, dtype=float)) for ri in r)
        if qf is None:
            qf_mats = tuple(np.zeros((n, n)) for _ in b)
        else:
            if len(qf) != len(b):
                raise GameSpecError(f"{len(b)} players need {len(b)} terminal weights")
            qf_mats = tuple(np.atleast_2d(np.array(qi, dtype=float)) for qi in qf)
        return cls(a_mats, b_mats, q_mats, r_mats, qf_mats, x0, horizon, float(control_bound))


def _check_symmetric(m: np.ndarray, size: int, what: str):
    if m.shape != (size, size):
        raise GameSpecError(f"{what} has shape {m.shape}, expected {(size, size)}")
    if not np.allclose(m, m.T, atol=_SYM_TOL * max(1.0, float(np.abs(m).max(initial=0.0)))):
        raise GameSpecError(f"{what} is not symmetric")


def validate_lq_spec(spec: LqSpec):
    n = spec.state_dim
    if spec.horizon < 0:
        raise GameSpecError("horizon must be >= 0")
    if not spec.control_bound > 0:
        raise GameSpecError("control_bound must be positive")
    if len(spec.a_matrices) != spec.horizon:
        raise GameSpecError(f"{len(spec.a_matrices)} A matrices for horizon {spec.horizon}")
    for k, a in enumerate(spec.a_matrices):
        if a.shape != (n, n):
            raise GameSpecError(f"A[{k}] has shape {a.shape}, expected {(n, n)}")

    for i in range(spec.num_players):
        q, qf, r = spec.state_weights[i], spec.terminal_weights[i], spec.control_weights[i]
        _check_symmetric(q, n, f"state weight Q[{i}]")
        _check_symmetric(qf, n, f"terminal weight Qf[{i}]")
        m = r.shape[0]
        _check_symmetric(r, m, f"control weight R[{i}]")
        for name, w in (("Q", q), ("Qf", qf)):
            if np.linalg.eigvalsh(w).min() < -_SYM_TOL:
                raise GameSpecError(f"{name}[{i}] is not positive semidefinite")
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise GameSpecError(f"own-control weight R[{i}] is not positive definite") from None
        if len(spec.b_matrices[i]) != spec.horizon:
            raise GameSpecError(f"player {i}: {len(spec.b_matrices[i])} B matrices for horizon {spec.horizon}")
        for k, b in enumerate(spec.b_matrices[i]):
            if b.shape != (n, m):
                raise GameSpecError(f"B[{i}][{k}] has shape {b.shape}, expected {(n, m)}")


def build_lq_game(spec: LqSpec, name: str = "lq") -> DynamicGame:
    """DynamicGame with linear transition and the LqSpec's quadratic costs."""
    validate_lq_spec(spec)
    N, K = spec.num_players, spec.horizon
    A, B = spec.a_matrices, spec.b_matrices

    def transition(k, x, us):
        x_next = A[k] @ x
        for i in range(N):
            x_next = x_next + B[i][k] @ us[i]
        return x_next

    def make_stage_cost(i):
        Q, R = spec.state_weights[i], spec.control_weights[i]

        def stage_cost(k, x, us):
            x_next = transition(k, x, us)
            return float(x_next @ Q @ x_next + us[i] @ R @ us[i])

        return stage_cost

    def make_terminal_cost(i):
        Qf = spec.terminal_weights[i]
        return lambda x: float(x @ Qf @ x)

    bound = spec.control_bound
    dims = spec.control_dims
    return DynamicGame(
        num_players=N,
        horizon=K,
        state_dim=spec.state_dim,
        control_dims=dims,
        transition=transition,
        stage_costs=tuple(make_stage_cost(i) for i in range(N)),
        terminal_costs=tuple(make_terminal_cost(i) for i in range(N)),
        initial_state=spec.initial_state,
        lower_bounds=tuple(np.full((K, m), -bound) for m in dims),
        upper_bounds=tuple(np.full((K, m), bound) for m in dims),
        gain_limit=bound,
        name=name,
        lq_spec=spec,
    )


def scalar_lq_spec(num_players: int = 2, horizon: int = 1, a: float = 1.0, b: float = 1.0,
                   state_weight: float = 1.0, control_weight: float = 1.0,
                   terminal_weight: float = 0.0, x0: float = 1.0,
                   control_bound: float = 5.0) -> LqSpec:
    """Symmetric scalar LQ game. Defaults give the one-stage game with Nash u_i = -1/3."""
    return LqSpec.from_params(
        a=a,
        b=[b] * num_players,
        q=[state_weight] * num_players,
        r=[control_weight] * num_players,
        qf=[terminal_weight] * num_players,
        x0=x0,
        horizon=horizon,
        control_bound=control_bound,
    )


def three_player_lq_spec(horizon: int = 3, a: float = 1.0, b: float = 1.0,
                         state_weight: float = 1.0, control_weight: float = 1.0,
                         x0: float = 1.0, control_bound: float = 5.0) -> LqSpec:
    """Three symmetric players steering a shared scalar state over three stages."""
    return scalar_lq_spec(3, horizon, a, b, state_weight, control_weight, 0.0, x0, control_bound)


def random_lq_spec(num_players: int = 2, horizon: int = 3, state_dim: int = 1,
                   control_dim: int = 1, seed: int = 0, control_bound: float = 5.0) -> LqSpec:
    """Seeded strictly convex LQ instance.

    A has spectral radius in [0.5, 1), Q_i = L L'/n + I/2, R_i = r_i I with
    r_i in [1, 2] and B entries of order 0.5, so each player's cost is
    strictly convex in its own controls and the first-order system is
    well conditioned.
    """
    rng = np.random.default_rng(seed)
    n, m = int(state_dim), int(control_dim)

    M = rng.normal(size=(n, n))
    radius = rng.uniform(0.5, 1.0)
    A = radius * M / max(np.abs(np.linalg.eigvals(M)).max(), 1e-12)
    B = [0.5 * rng.normal(size=(n, m)) for _ in range(num_players)]
    Q = []
    for _ in range(num_players):
        L = rng.normal(size=(n, n))
        Q.append(L @ L.T / n + 0.5 * np.eye(n))
    R = [rng.uniform(1.0, 2.0) * np.eye(m) for _ in range(num_players)]
    x0 = rng.choice([-1.0, 1.0], size=n) * rng.uniform(0.5, 1.5, size=n)
    return LqSpec.from_params(A, B, Q, R, x0, horizon, control_bound=control_bound)


# ----------------------------------------------------------------------
# Two-player non-quadratic game
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class NonQuadraticSpec:
    """Scalar two-player game x_{k+1} = a x_k + b_1 u_1 + b_2 u_2 with

    g_i = q_i x_{k+1}^2 + r_i u_i^2 + c_i u_i^4 + e_i (exp(l_i x_{k+1}) - 1 - l_i x_{k+1})

    and no terminal cost. Every term is convex, so each player's open-loop
    cost is strictly convex in its own controls. With c_i = e_i = 0 the game
    is the LQ game quadratic_core().
    """

    horizon: int = 3
    a: float = 0.9
    b: tuple[float, float] = (1.0, 1.0)
    state_weight: tuple[float, float] = (1.0, 1.0)
    control_weight: tuple[float, float] = (1.0, 1.0)
    quartic_weight: tuple[float, float] = (0.5, 0.5)
    exp_weight: tuple[float, float] = (0.2, 0.2)
    exp_rate: tuple[float, float] = (1.0, 1.0)
    initial_state: float = 1.0
    control_bound: float = 2.0
    gain_limit: float = 2.0

    @property
    def is_quadratic(self) -> bool:
        return not any(self.quartic_weight) and not any(self.exp_weight)

    def quadratic_core(self) -> LqSpec:
        return LqSpec.from_params(
            a=self.a,
            b=list(self.b),
            q=list(self.state_weight),
            r=list(self.control_weight),
            x0=self.initial_state,
            horizon=self.horizon,
            control_bound=self.control_bound,
        )


def _bound_scan(spec: NonQuadraticSpec) -> list[float]:
    """Worst-case |x_k| reachable with controls inside the bounds."""
    reach = [abs(spec.initial_state)]
    push = (abs(spec.b[0]) + abs(spec.b[1])) * spec.control_bound
    for _ in range(spec.horizon):
        reach.append(abs(spec.a) * reach[-1] + push)
    return reach


def build_two_player_nonquadratic(spec: NonQuadraticSpec | None = None, **params) -> DynamicGame:
    """Two-player non-quadratic template; usable in open-loop and feedback modes."""
    if spec is None:
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
        try:
            spec = NonQuadraticSpec(**params)
        except TypeError as e:
            raise GameSpecError(f"nonquadratic template: {e}") from e

    for name in ("b", "state_weight", "control_weight", "quartic_weight", "exp_weight", "exp_rate"):
        values = getattr(spec, name)
        if len(values) != 2 or not all(np.isfinite(values)):
            raise GameSpecError(f"{name} must hold two finite coefficients, got {values}")
    if spec.horizon < 0:
        raise GameSpecError("horizon must be >= 0")
    if min(spec.control_weight) <= 0:
        raise GameSpecError("own-control weights must be positive")
    if min(spec.state_weight) < 0 or min(spec.quartic_weight) < 0 or min(spec.exp_weight) < 0:
        raise GameSpecError("state, quartic and exponential weights must be non-negative")
    if not spec.control_bound > 0 or not spec.gain_limit > 0:
        raise GameSpecError("control_bound and gain_limit must be positive")

    a, b = spec.a, spec.b

    def penalty(i: int, x: float, u: float) -> float:
        lam = spec.exp_rate[i]
        with np.errstate(over="ignore"):
            growth = np.exp(lam * x) - 1.0 - lam * x
        return (spec.state_weight[i] * x * x + spec.control_weight[i] * u * u
                + spec.quartic_weight[i] * u ** 4 + spec.exp_weight[i] * growth)

    reach = _bound_scan(spec)
    for k in range(1, spec.horizon + 1):
        for i in range(2):
            for x in (-reach[k], reach[k]):
                worst = penalty(i, x, spec.control_bound)
                if not np.isfinite(worst):
                    raise GameSpecError(
                        f"bound scan: player {i} cost is non-finite at stage {k - 1} "
                        f"(|x| <= {reach[k]:.4g}, |u| <= {spec.control_bound}); "
                        f"reduce exp_rate, control_bound or a"
                    )

    def transition(k, x, us):
        return np.array([a * x[0] + b[0] * us[0][0] + b[1] * us[1][0]])

    def make_stage_cost(i):
        def stage_cost(k, x, us):
            x_next = a * x[0] + b[0] * us[0][0] + b[1] * us[1][0]
            return float(penalty(i, x_next, us[i][0]))

        return stage_cost

    K, bound = spec.horizon, spec.control_bound
    return DynamicGame(
        num_players=2,
        horizon=K,
        state_dim=1,
        control_dims=(1, 1),
        transition=transition,
        stage_costs=(make_stage_cost(0), make_stage_cost(1)),
        terminal_costs=(lambda x: 0.0, lambda x: 0.0),
        initial_state=np.array([spec.initial_state]),
        lower_bounds=(np.full((K, 1), -bound), np.full((K, 1), -bound)),
        upper_bounds=(np.full((K, 1), bound), np.full((K, 1), bound)),
        gain_limit=spec.gain_limit,
        name="nonquadratic",
        lq_spec=spec.quadratic_core() if spec.is_quadratic else None,
    )


# ----------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------
GameFactory = Callable[..., DynamicGame]

_REGISTRY: dict[str, GameFactory] = {}


def register_game(name: str, factory: GameFactory, replace: bool = False):
    """Make a game factory available to configs under `name`."""
    if name in _REGISTRY and not replace:
        raise GameSpecError(f"game template '{name}' is already registered")
    _REGISTRY[name] = factory
    log.debug("Registered game template: %s", name)


def available_templates() -> list[str]:
    return sorted(_REGISTRY)


def build_game(template: str, params: dict[str, Any] | None = None) -> DynamicGame:
    factory = _REGISTRY.get(template)
    if factory is None:
        raise GameSpecError(f"unknown game template '{template}'; available: {', '.join(available_templates())}")
    try:
        return factory(**(params or {}))
    except TypeError as e:
        raise GameSpecError(f"template '{template}': {e}") from e


register_game("lq", lambda **p: build_lq_game(scalar_lq_spec(**p), name="lq"))
register_game("lq_three_player", lambda **p: build_lq_game(three_player_lq_spec(**p), name="lq_three_player"))
register_game("lq_random", lambda **p: build_lq_game(random_lq_spec(**p), name="lq_random"))
register_game("lq_matrices", lambda **p: build_lq_game(LqSpec.from_params(**p), name="lq_matrices"))
register_game("nonquadratic", build_two_player_nonquadratic)
