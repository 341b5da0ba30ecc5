"""Parallel repetition of multiplayer one-round games: values, connection graphs, expansion."""

from .game import (
    BOTTOM,
    Game,
    GameError,
    Strategy,
    anchor,
    build_free_uniform,
    build_ghz,
    build_random,
    repeat,
    validate,
)
from .value import BudgetExceeded, ValueResult, game_value, value_sequence, win_probability

__all__ = [
    "BOTTOM",
    "BudgetExceeded",
    "Game",
    "GameError",
    "Strategy",
    "ValueResult",
    "anchor",
    "build_free_uniform",
    "build_ghz",
    "build_random",
    "game_value",
    "repeat",
    "validate",
    "value_sequence",
    "win_probability",
]
