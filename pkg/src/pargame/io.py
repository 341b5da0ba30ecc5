"""Game files, strategy files and deterministic JSON reports."""

from __future__ import annotations

import hashlib
import json
import math
import re
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .game import (
    BOTTOM,
    AcceptTable,
    AlwaysAccept,
    Game,
    Strategy,
    Violation,
    check_strategy,
    ghz_rule,
    validate,
)

SCHEMA_VERSION = "1"
RESERVED = "⊥"
_RATIONAL = re.compile(r"^(-?\d+)(?:/(\d+))?$")
BUILTINS = {"always": AlwaysAccept(), "ghz": ghz_rule}


class GameFileError(ValueError):
    def __init__(self, message: str, violations: list[Violation] | None = None):
        super().__init__(message)
        self.violations = violations or []


def parse_rational(text) -> Fraction:
    """Parse a canonical "a/b" (or integer) string."""
    if not isinstance(text, str):
        raise GameFileError(f"probability {text!r} must be a rational string like \"1/4\"")
    m = _RATIONAL.match(text.strip())
    if not m:
        raise GameFileError(f"probability {text!r} is not a rational \"a/b\"")
    num, den = int(m.group(1)), int(m.group(2) or 1)
    if den == 0:
        raise GameFileError(f"probability {text!r} has a zero denominator")
    value = Fraction(num, den)
    if m.group(2) is not None and (value.numerator, value.denominator) != (num, den):
        raise GameFileError(f"probability {text!r} is not in lowest terms")
    return value


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def _symbol(value):
    """JSON value -> hashable symbol (lists become tuples)."""
    if isinstance(value, list):
        return tuple(_symbol(v) for v in value)
    if isinstance(value, dict):
        raise GameFileError("symbols must be strings, numbers or lists")
    return value


def _has_reserved(value) -> bool:
    if isinstance(value, (list, tuple)):
        return any(_has_reserved(v) for v in value)
    return value == RESERVED or value is BOTTOM


def _json_symbol(value):
    if isinstance(value, tuple):
        return [_json_symbol(v) for v in value]
    if value is BOTTOM:
        return RESERVED
    return value


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFileError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def game_from_dict(data, source: str = "<game>") -> Game:
    """Build and validate a game from the JSON structure of a game file."""
    if not isinstance(data, dict):
        raise GameFileError(f"{source}: top level must be an object")
    for key in ("players", "question_alphabets", "answer_alphabets", "distribution"):
        if key not in data:
            raise GameFileError(f"{source}: missing field {key!r}")
    qa = tuple(tuple(_symbol(s) for s in a) for a in data["question_alphabets"])
    aa = tuple(tuple(_symbol(s) for s in a) for a in data["answer_alphabets"])
    if any(_has_reserved(s) for a in qa + aa for s in a):
        raise GameFileError(f"{source}: reserved symbol {RESERVED} may not appear in a game file")
    k = data["players"]
    if not isinstance(k, int) or k < 1 or len(qa) != k:
        raise GameFileError(f"{source}: players = {k!r} but {len(qa)} question alphabets given")
    qidx = [{s: i for i, s in enumerate(a)} for a in qa]
    aidx = [{s: i for i, s in enumerate(a)} for a in aa]

    def ids(symbols, index, what):
        symbols = [_symbol(s) for s in symbols]
        if any(_has_reserved(s) for s in symbols):
            raise GameFileError(f"{source}: reserved symbol {RESERVED} in {what}")
        return tuple(index[t].get(s, -1) if t < len(index) else -1 for t, s in enumerate(symbols))

    dist: dict = {}
    for n, entry in enumerate(data["distribution"]):
        try:
            x = ids(entry["questions"], qidx, f"distribution[{n}]")
            p = parse_rational(entry["p"])
        except (KeyError, TypeError):
            raise GameFileError(f"{source}: distribution[{n}] needs 'questions' and 'p'") from None
        except GameFileError as exc:
            raise GameFileError(f"{source}: distribution[{n}]: {exc}") from None
        if x in dist:
            raise GameFileError(f"{source}: distribution[{n}] repeats question tuple {entry['questions']}")
        dist[x] = p
    pred_spec = data.get("predicate", {"builtin": "always"})
    if "builtin" in pred_spec:
        name = pred_spec["builtin"]
        if name not in BUILTINS:
            raise GameFileError(f"{source}: unknown builtin predicate {name!r}")
        predicate = BUILTINS[name]
    elif "accepts" in pred_spec:
        table = set()
        for n, entry in enumerate(pred_spec["accepts"]):
            try:
                table.add(
                    (
                        ids(entry["questions"], qidx, f"accepts[{n}]"),
                        ids(entry["answers"], aidx, f"accepts[{n}]"),
                    )
                )
            except (KeyError, TypeError):
                raise GameFileError(f"{source}: accepts[{n}] needs 'questions' and 'answers'") from None
        predicate = AcceptTable(frozenset(table))
    else:
        raise GameFileError(f"{source}: predicate needs 'accepts' or 'builtin'")
    game = Game(qa, aa, tuple(sorted(dist.items())), predicate)
    problems = validate(game)
    if problems:
        summary = "; ".join(str(v) for v in problems)
        raise GameFileError(f"{source}: invalid game: {summary}", problems)
    return game


def parse_game_file(path) -> Game:
    path = Path(path)
    return game_from_dict(_load_json(path.read_text(encoding="utf-8"), str(path)), str(path))


def game_to_dict(game: Game, builtin: str | None = None) -> dict:
    """Serialise a game; the predicate is written as an explicit accept list unless ``builtin``."""
    out = {
        "players": game.k,
        "question_alphabets": [[_json_symbol(s) for s in a] for a in game.question_alphabets],
        "answer_alphabets": [[_json_symbol(s) for s in a] for a in game.answer_alphabets],
        "distribution": [
            {"questions": _json_symbol(game.question_symbols(x)), "p": format_rational(p)}
            for x, p in game.distribution
        ],
    }
    if builtin is not None:
        out["predicate"] = {"builtin": builtin}
    else:
        out["predicate"] = {
            "accepts": [
                {"questions": _json_symbol(game.question_symbols(x)), "answers": _json_symbol(game.answer_symbols(a))}
                for x in game.support
                for a in game.answer_tuples()
                if game.accepts(x, a)
            ]
        }
    return out


def game_digest(game: Game) -> str:
    text = json.dumps(game_to_dict(game), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def fixture_path(name: str):
    return resources.files("pargame") / "fixtures" / name


# --------------------------------------------------------------------------
# strategies: {"players": [[{"question": q, "answer": a}, ...], ...]}


def strategy_to_dict(game: Game, strategy: Strategy) -> dict:
    return {
        "players": [
            [
                {"question": _json_symbol(game.question_alphabets[t][q]), "answer": _json_symbol(game.answer_alphabets[t][a])}
                for q, a in sorted(m.items())
            ]
            for t, m in enumerate(strategy.maps)
        ]
    }


def _from_json_symbol(value):
    if isinstance(value, list):
        return tuple(_from_json_symbol(v) for v in value)
    if value == RESERVED:
        return BOTTOM
    return value


def strategy_from_dict(game: Game, data) -> Strategy:
    if not isinstance(data, dict) or len(data.get("players", [])) != game.k:
        raise GameFileError(f"strategy must list one table per player ({game.k})")
    maps = []
    for t, rows in enumerate(data["players"]):
        qidx = {s: i for i, s in enumerate(game.question_alphabets[t])}
        aidx = {s: i for i, s in enumerate(game.answer_alphabets[t])}
        m = {}
        for row in rows:
            q, a = _from_json_symbol(row["question"]), _from_json_symbol(row["answer"])
            if q not in qidx or a not in aidx:
                raise GameFileError(f"player {t + 1}: unknown symbol in strategy row {row}")
            m[qidx[q]] = aidx[a]
        maps.append(m)
    strategy = Strategy.from_maps(maps)
    check_strategy(game, strategy)
    return strategy


def parse_strategy_file(game: Game, path) -> Strategy:
    path = Path(path)
    return strategy_from_dict(game, _load_json(path.read_text(encoding="utf-8"), str(path)))


# --------------------------------------------------------------------------
# reports


def to_jsonable(value):
    """Exact rationals become "a/b", floats keep 15 significant digits, non-finite floats become strings."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.15g}")
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if value is BOTTOM:
        return RESERVED
    raise TypeError(f"cannot serialise {type(value).__name__}")


def render_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, ensure_ascii=False) + "\n"
