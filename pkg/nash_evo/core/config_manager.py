"""
config_manager.py
Loads, validates and saves experiment configurations (YAML).

The schema is strict: unknown keys fail loading with the dotted key path,
and every section fills in documented defaults. The effective configuration
can be written back, and a result file written by the CLI loads through its
echoed `config` section.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any

import yaml

from nash_evo.core.errors import ConfigError, GameSpecError
from nash_evo.core.ga_solver import GaConfig
from nash_evo.core.game_model import StrategyMode
from nash_evo.core.local_search import SimplexConfig
from nash_evo.core.pso_solver import PsoConfig
from nash_evo.core.templates import available_templates, build_game
from nash_evo.core.verify import SearchBudget

log = logging.getLogger("ConfigManager")

SOLVER_KINDS = ("ga", "pso", "hybrid_pso")
DEFAULT_HYBRID_ITER = 10
SECTIONS = ("game", "solver", "verification", "run")


@dataclass(frozen=True)
class GameSection:
    template: str
    strategy_mode: StrategyMode = StrategyMode.OPEN_LOOP
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.template not in available_templates():
            raise ConfigError(
                f"game.template '{self.template}' is not registered; available: {', '.join(available_templates())}",
                field="game.template",
            )
        try:
            object.__setattr__(self, "strategy_mode", StrategyMode(self.strategy_mode))
        except ValueError:
            raise ConfigError(
                f"game.strategy_mode must be one of {[m.value for m in StrategyMode]}", field="game.strategy_mode"
            ) from None
        if not isinstance(self.params, dict):
            raise ConfigError("game.params must be a mapping", field="game.params")
        # parameter names and values are only checked by the template factory
        try:
            build_game(self.template, self.params)
        except (GameSpecError, ValueError) as e:
            raise ConfigError(f"game.params do not build template '{self.template}': {e}", field="game.params") from e


@dataclass(frozen=True)
class SolverSection:
    kind: str
    ga: GaConfig = GaConfig()
    pso: PsoConfig = PsoConfig()
    local_search: SimplexConfig = SimplexConfig()

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ConfigError(f"solver.kind must be one of {SOLVER_KINDS}, got '{self.kind}'", field="solver.kind")
        if self.kind == "hybrid_pso" and self.pso.hybrid_iter == 0:
            object.__setattr__(self, "pso", dataclasses.replace(self.pso, hybrid_iter=DEFAULT_HYBRID_ITER))


@dataclass(frozen=True)
class VerificationSection:
    enabled: bool = True
    tolerance: float = 1e-3
    multistarts: int = 8
    max_iterations: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError(f"verification.tolerance must be > 0, got {self.tolerance}", field="verification.tolerance")
        SearchBudget(self.multistarts, self.max_iterations, self.seed)

    @property
    def budget(self) -> SearchBudget:
        return SearchBudget(self.multistarts, self.max_iterations, self.seed)


@dataclass(frozen=True)
class RunSection:
    repeat: int = 1
    base_seed: int = 0
    seeds: tuple[int, ...] | None = None
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.repeat < 1:
            raise ConfigError(f"run.repeat must be >= 1, got {self.repeat}", field="run.repeat")
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1", field="run.workers")
        if self.seeds is not None:
            seeds = tuple(int(s) for s in self.seeds)
            if len(seeds) != self.repeat:
                raise ConfigError(
                    f"run.seeds lists {len(seeds)} seeds but run.repeat is {self.repeat}", field="run.seeds"
                )
            object.__setattr__(self, "seeds", seeds)

    def run_seeds(self) -> list[int]:
        """Explicit seed list, or base_seed + r for run r."""
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + r for r in range(self.repeat)]


@dataclass(frozen=True)
class ExperimentConfig:
    game: GameSection
    solver: SolverSection
    verification: VerificationSection = VerificationSection()
    run: RunSection = RunSection()

    def to_dict(self) -> dict[str, Any]:
        return _plain(dataclasses.asdict(self))

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None,
                       repeat: int | None = None, solver: str | None = None) -> "ExperimentConfig":
        """Apply CLI overrides; --seed pins a single run unless --repeat is also given.

        The seed also drives the verifier's multistarts.
        """
        run, verification = self.run, self.verification
        if seed is not None:
            run = dataclasses.replace(run, base_seed=seed, seeds=None, repeat=1 if repeat is None else repeat)
            verification = dataclasses.replace(verification, seed=seed)
        elif repeat is not None:
            run = dataclasses.replace(run, repeat=repeat, seeds=None)
        if out_dir is not None:
            run = dataclasses.replace(run, out_dir=out_dir)
        section = self.solver
        if solver is not None:
            pso = section.pso
            if solver == "pso":
                pso = dataclasses.replace(pso, hybrid_iter=0)
            section = SolverSection(solver, section.ga, pso, section.local_search)
        return dataclasses.replace(self, solver=section, run=run, verification=verification)

    def for_seed(self, seed: int) -> "ExperimentConfig":
        """Single-run configuration as echoed into a result file."""
        return dataclasses.replace(
            self,
            run=dataclasses.replace(self.run, repeat=1, seeds=(seed,), base_seed=seed),
            solver=dataclasses.replace(
                self.solver,
                ga=dataclasses.replace(self.solver.ga, rng_seed=seed),
                pso=dataclasses.replace(self.solver.pso, rng_seed=seed),
            ),
        )


def _plain(value: Any) -> Any:
    """Reduce to YAML-safe builtins (enums by value, tuples as lists)."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, StrategyMode):
        return value.value
    if hasattr(value, "item"):
        return value.item()
    return value


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------
def _coerce(value: Any, annotation: str, key: str) -> Any:
    """Check a scalar against its field annotation; floats also accept numeric strings."""
    nullable = "None" in annotation
    base = annotation.split("|")[0].strip()
    if value is None and nullable:
        return value
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' must be true or false, got {value!r}", field=key)
    elif base == "int":
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}", field=key)
    elif base == "float":
        # YAML 1.1 reads 1e-3 as a string
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"'{key}' must be a number, got '{value}'", field=key) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' must be a number, got {value!r}", field=key)
    return value


def _section(cls, raw: Any, path: str, field_prefix: str = ""):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"'{path}' must be a mapping", field=path)
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key '{path}.{key}'", field=f"{path}.{key}")
        values[key] = _coerce(value, str(known[key].type), f"{path}.{key}")
    try:
        return cls(**values)
    except ConfigError as e:
        raise ConfigError(str(e), field=f"{field_prefix}{e.field}" if e.field else path) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value in '{path}': {e}", field=path) from e


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a parsed YAML document and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping with game and solver sections")
    if raw.get("kind") == "solve_result":
        raw = raw.get("config")
        if not isinstance(raw, dict):
            raise ConfigError("result file carries no config section", field="config")
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown key '{key}'", field=key)
    for key in ("game", "solver"):
        if not isinstance(raw.get(key), dict):
            raise ConfigError(f"missing section '{key}'", field=key)
    if "template" not in raw["game"]:
        raise ConfigError("missing key 'game.template'", field="game.template")
    if "kind" not in raw["solver"]:
        raise ConfigError("missing key 'solver.kind'", field="solver.kind")

    solver_raw = dict(raw["solver"])
    solver = _section(SolverSection, {
        "kind": solver_raw.pop("kind"),
        "ga": _section(GaConfig, solver_raw.pop("ga", None), "solver.ga", "solver."),
        "pso": _section(PsoConfig, solver_raw.pop("pso", None), "solver.pso", "solver."),
        "local_search": _section(SimplexConfig, solver_raw.pop("local_search", None), "solver.local_search", "solver."),
        **solver_raw,
    }, "solver")

    run_raw = dict(raw.get("run") or {})
    if run_raw.get("seeds") is not None and "repeat" not in run_raw and isinstance(run_raw["seeds"], list):
        run_raw["repeat"] = len(run_raw["seeds"])

    return ExperimentConfig(
        game=_section(GameSection, raw["game"], "game"),
        solver=solver,
        verification=_section(VerificationSection, raw.get("verification"), "verification"),
        run=_section(RunSection, run_raw, "run"),
    )


class ConfigManager:
    """Loads and saves an experiment configuration file."""

    def __init__(self, path: str | None = None):
        if path is None:
            base = os.path.dirname(os.path.dirname(__file__))
            path = os.path.join(base, "config", "config.yaml")
        self.path = path
        self.config: ExperimentConfig | None = None
        self.load()

    # ------------------------------------------------------------------
    def load(self) -> ExperimentConfig:
        """Parse and validate the YAML file."""
        if not os.path.exists(self.path):
            raise ConfigError(f"config file not found: {self.path}")
        with open(self.path, "r", encoding="utf-8") as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                line = mark.line + 1 if mark else None
                where = f" at line {line}, column {mark.column + 1}" if mark else ""
                raise ConfigError(f"{self.path}: YAML syntax error{where}: {e}", line=line) from e
        try:
            self.config = parse_config(raw)
        except ConfigError as e:
            raise ConfigError(f"{self.path}: {e}", field=e.field, line=e.line) from e
        log.info(
            "Loaded configuration %s: template=%s solver=%s repeat=%d",
            self.path, self.config.game.template, self.config.solver.kind, self.config.run.repeat,
        )
        return self.config

    # ------------------------------------------------------------------
    def save(self, config: ExperimentConfig | None = None, path: str | None = None):
        """Write the effective configuration as YAML."""
        if config is not None:
            self.config = config
        path = path or self.path
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.config.to_dict(), f, default_flow_style=False, sort_keys=False)
        log.info("Configuration saved to %s", path)


def load_config(path: str) -> ExperimentConfig:
    return ConfigManager(path).config
