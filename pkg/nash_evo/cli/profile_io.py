"""
profile_io.py
Strategy profile files (YAML).

    mode: open_loop
    players:
      - controls: [[-0.333], ...]      # K rows of m_i values
    # feedback: gains (K x m_i x n) and offsets (K x m_i) per player

A result file written by `solve` is accepted too; its `profile` key is read.
"""

from __future__ import annotations

import logging
import os
from typing import Any

import numpy as np
import yaml

from nash_evo.core.errors import ConfigError, DimensionError
from nash_evo.core.game_model import DynamicGame, StrategyMode, StrategyProfile, validate_profile

log = logging.getLogger("ProfileIO")


def profile_to_dict(profile: StrategyProfile) -> dict[str, Any]:
    if profile.mode is StrategyMode.OPEN_LOOP:
        players = [{"controls": np.asarray(u, dtype=float).tolist()} for u in profile.controls]
    else:
        players = [
            {"gains": np.asarray(g, dtype=float).tolist(), "offsets": np.asarray(b, dtype=float).tolist()}
            for g, b in zip(profile.gains, profile.offsets)
        ]
    return {"mode": profile.mode.value, "players": players}


def profile_from_dict(data: Any, game: DynamicGame | None = None) -> StrategyProfile:
    if not isinstance(data, dict) or not isinstance(data.get("players"), list):
        raise ConfigError("profile must be a mapping with a 'players' list", field="players")
    try:
        mode = StrategyMode(data.get("mode", StrategyMode.OPEN_LOOP.value))
    except ValueError:
        raise ConfigError(f"unknown profile mode '{data.get('mode')}'", field="mode") from None

    try:
        if mode is StrategyMode.OPEN_LOOP:
            profile = StrategyProfile.open_loop([p["controls"] for p in data["players"]])
        else:
            profile = StrategyProfile.feedback(
                [p["gains"] for p in data["players"]],
                [p["offsets"] for p in data["players"]],
            )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed profile entry: {e}", field="players") from e

    if game is not None:
        try:
            validate_profile(game, profile)
        except DimensionError as e:
            raise ConfigError(f"profile does not fit game '{game.name}': {e}", field="players") from e
    return profile


def read_profile(path: str, game: DynamicGame | None = None) -> StrategyProfile:
    if not os.path.exists(path):
        raise ConfigError(f"profile file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"{path}: YAML syntax error: {e}", line=mark.line + 1 if mark else None) from e
    if isinstance(data, dict) and data.get("kind") == "solve_result":
        data = data.get("profile")
    profile = profile_from_dict(data, game)
    log.info("Loaded %s profile for %d players from %s", profile.mode.value, profile.num_players, path)
    return profile


def write_profile(profile: StrategyProfile, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(profile_to_dict(profile), f, default_flow_style=False, sort_keys=False)
