"""k-player one-round games: representation, validation, generators and transforms.

Symbols are interned to dense integer ids per player; every question tuple,
answer tuple and strategy table below is expressed in ids. Probabilities are
``fractions.Fraction`` throughout.
"""

from __future__ import annotations

import enum
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Iterable, Mapping, Sequence

Ids = tuple[int, ...]


class Anchor(enum.Enum):
    BOTTOM = "⊥"

    def __repr__(self) -> str:
        return "⊥"

    __str__ = __repr__


#: Reserved anchoring symbol; never equal to any user symbol.
BOTTOM = Anchor.BOTTOM


class GameError(ValueError):
    pass


# --------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class AcceptTable:
    """Explicit accept set of ``(question ids, answer ids)`` pairs."""

    accepts: frozenset

    def __call__(self, x: Ids, a: Ids) -> bool:
        return (x, a) in self.accepts


@dataclass(frozen=True)
class AlwaysAccept:
    def __call__(self, x: Ids, a: Ids) -> bool:
        return True


@dataclass(frozen=True)
class AnchoredPredicate:
    base: Callable[[Ids, Ids], bool]
    bottom: Ids  # id of the anchoring symbol for each player

    def __call__(self, x: Ids, a: Ids) -> bool:
        if any(q == b for q, b in zip(x, self.bottom)):
            return True
        return self.base(x, a)


@dataclass(frozen=True)
class RepeatedPredicate:
    """Per-coordinate conjunction of ``base`` over an n-fold product game.

    Ids of the repeated game are mixed-radix numbers over the base ids, the
    first coordinate being most significant.
    """

    base: Callable[[Ids, Ids], bool]
    n: int
    question_sizes: Ids
    answer_sizes: Ids

    def __call__(self, x: Ids, a: Ids) -> bool:
        xs = [unpack_ids(q, s, self.n) for q, s in zip(x, self.question_sizes)]
        as_ = [unpack_ids(b, s, self.n) for b, s in zip(a, self.answer_sizes)]
        for i in range(self.n):
            if not self.base(tuple(q[i] for q in xs), tuple(b[i] for b in as_)):
                return False
        return True


def pack_ids(digits: Sequence[int], size: int) -> int:
    out = 0
    for d in digits:
        out = out * size + d
    return out


def unpack_ids(value: int, size: int, n: int) -> Ids:
    digits = [0] * n
    for i in range(n - 1, -1, -1):
        value, digits[i] = divmod(value, size)
    return tuple(digits)


# --------------------------------------------------------------------------
# game and strategy


@dataclass(frozen=True)
class Game:
    question_alphabets: tuple[tuple[Any, ...], ...]
    answer_alphabets: tuple[tuple[Any, ...], ...]
    distribution: tuple[tuple[Ids, Fraction], ...]
    predicate: Callable[[Ids, Ids], bool] = field(compare=True)

    @property
    def k(self) -> int:
        return len(self.question_alphabets)

    @cached_property
    def prob(self) -> dict[Ids, Fraction]:
        return dict(self.distribution)

    @cached_property
    def support(self) -> tuple[Ids, ...]:
        """Question tuples with strictly positive mass, in id order."""
        return tuple(sorted(x for x, p in self.distribution if p > 0))

    @property
    def question_sizes(self) -> Ids:
        return tuple(len(a) for a in self.question_alphabets)

    @property
    def answer_sizes(self) -> Ids:
        return tuple(len(a) for a in self.answer_alphabets)

    @property
    def answer_count(self) -> int:
        """Size of the joint answer alphabet, the product over players."""
        return math.prod(self.answer_sizes)

    def accepts(self, x: Ids, a: Ids) -> bool:
        return bool(self.predicate(x, a))

    def answer_tuples(self) -> Iterable[Ids]:
        return itertools.product(*(range(s) for s in self.answer_sizes))

    def question_domain(self, t: int) -> tuple[int, ...]:
        """Ids of player ``t``'s questions that occur with positive mass."""
        return tuple(sorted({x[t] for x in self.support}))

    def question_symbols(self, x: Ids) -> tuple:
        return tuple(self.question_alphabets[t][q] for t, q in enumerate(x))

    def answer_symbols(self, a: Ids) -> tuple:
        return tuple(self.answer_alphabets[t][b] for t, b in enumerate(a))

    @classmethod
    def from_symbols(
        cls,
        question_alphabets: Sequence[Sequence[Any]],
        answer_alphabets: Sequence[Sequence[Any]],
        distribution: Mapping[tuple, Fraction] | Iterable[tuple[tuple, Fraction]],
        accepts: Iterable[tuple[tuple, tuple]] | None = None,
        predicate: Callable[[Ids, Ids], bool] | None = None,
    ) -> "Game":
        """Build a game from symbol-level data, interning symbols in the given order."""
        qa = tuple(tuple(a) for a in question_alphabets)
        aa = tuple(tuple(a) for a in answer_alphabets)
        qidx = [{s: i for i, s in enumerate(a)} for a in qa]
        aidx = [{s: i for i, s in enumerate(a)} for a in aa]
        items = distribution.items() if isinstance(distribution, Mapping) else distribution
        dist: dict[Ids, Fraction] = {}
        for xs, p in items:
            x = tuple(qidx[t][s] for t, s in enumerate(xs))
            dist[x] = dist.get(x, Fraction(0)) + Fraction(p)
        if predicate is None:
            if accepts is None:
                predicate = AlwaysAccept()
            else:
                table = frozenset(
                    (
                        tuple(qidx[t][s] for t, s in enumerate(xs)),
                        tuple(aidx[t][s] for t, s in enumerate(as_)),
                    )
                    for xs, as_ in accepts
                )
                predicate = AcceptTable(table)
        return cls(qa, aa, tuple(sorted(dist.items())), predicate)


@dataclass(frozen=True)
class Strategy:
    """One deterministic answer table per player, question id -> answer id."""

    tables: tuple[tuple[tuple[int, int], ...], ...]

    @classmethod
    def from_maps(cls, maps: Sequence[Mapping[int, int]]) -> "Strategy":
        return cls(tuple(tuple(sorted(m.items())) for m in maps))

    @cached_property
    def maps(self) -> tuple[dict[int, int], ...]:
        return tuple(dict(t) for t in self.tables)

    def answer(self, x: Ids) -> Ids:
        return tuple(m[q] for m, q in zip(self.maps, x))


def check_strategy(game: Game, strategy: Strategy) -> None:
    if len(strategy.tables) != game.k:
        raise GameError(f"strategy has {len(strategy.tables)} tables for {game.k} players")
    for t, m in enumerate(strategy.maps):
        missing = [q for q in game.question_domain(t) if q not in m]
        if missing:
            sym = game.question_alphabets[t][missing[0]]
            raise GameError(f"strategy for player {t + 1} undefined on question {sym!r}")
        for q, b in m.items():
            if not 0 <= b < game.answer_sizes[t]:
                raise GameError(f"player {t + 1} answer id {b} outside alphabet")


def constant_strategy(game: Game, answer: int = 0) -> Strategy:
    return Strategy.from_maps(
        [{q: answer for q in game.question_domain(t)} for t in range(game.k)]
    )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.location}: {self.message}"


def validate(game: Game) -> list[Violation]:
    """Return every invariant violation; an empty list means the game is valid."""
    out: list[Violation] = []
    k = len(game.question_alphabets)
    if k < 1:
        out.append(Violation("no-players", "players", "a game needs at least one player"))
    if len(game.answer_alphabets) != k:
        out.append(
            Violation(
                "arity mismatch",
                "answer_alphabets",
                f"{len(game.answer_alphabets)} answer alphabets for {k} players",
            )
        )
    for name, alphabets in (("question", game.question_alphabets), ("answer", game.answer_alphabets)):
        for t, alpha in enumerate(alphabets):
            if not alpha:
                out.append(Violation("empty alphabet", f"{name}_alphabets[{t}]", "alphabet is empty"))
            if len(set(alpha)) != len(alpha):
                out.append(Violation("duplicate symbol", f"{name}_alphabets[{t}]", "symbols repeat"))
    total = Fraction(0)
    for x, p in game.distribution:
        loc = f"distribution{list(x)}"
        if len(x) != k:
            out.append(Violation("arity mismatch", loc, f"tuple of length {len(x)} for k={k}"))
            continue
        for t, q in enumerate(x):
            if not 0 <= q < len(game.question_alphabets[t]):
                out.append(Violation("bad symbol", loc, f"question id {q} outside player {t + 1} alphabet"))
        if not isinstance(p, Fraction):
            out.append(Violation("not rational", loc, f"probability {p!r} is not a Fraction"))
        elif p < 0:
            out.append(Violation("negative probability", loc, f"p = {p}"))
        total += Fraction(p)
    if total != 1:
        out.append(Violation("sum ≠ 1", "distribution", f"probabilities sum to {total}"))
    if isinstance(game.predicate, AcceptTable):
        for x, a in sorted(game.predicate.accepts):
            loc = f"accepts[{list(x)}, {list(a)}]"
            if len(x) != k or len(a) != k:
                out.append(Violation("arity mismatch", loc, "accept entry arity differs from k"))
                continue
            if any(not 0 <= b < len(game.answer_alphabets[t]) for t, b in enumerate(a)):
                out.append(Violation("bad symbol", loc, "answer id outside alphabet"))
            if any(not 0 <= q < len(game.question_alphabets[t]) for t, q in enumerate(x)):
                out.append(Violation("bad symbol", loc, "question id outside alphabet"))
    return out


# --------------------------------------------------------------------------
# generators


def ghz_rule(x: Sequence[int], a: Sequence[int]) -> bool:
    return (x[0] & x[1] & x[2]) == (a[0] ^ a[1] ^ a[2])


def build_ghz() -> Game:
    """The three-player GHZ game on binary questions and answers."""
    support = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
    accepts = [
        (x, a) for x in support for a in itertools.product((0, 1), repeat=3) if ghz_rule(x, a)
    ]
    return Game.from_symbols(
        [(0, 1)] * 3,
        [(0, 1)] * 3,
        {x: Fraction(1, 4) for x in support},
        accepts=accepts,
    )


def build_free_uniform(
    k: int,
    d: int,
    answers: int = 2,
    predicate: Callable[[Ids, Ids], bool] | None = None,
) -> Game:
    """Uniform distribution over ``[d]^k``; always-accepting unless ``predicate`` is given."""
    if k < 2 or d < 1:
        raise GameError(f"free game needs k >= 2 and d >= 1, got k={k}, d={d}")
    p = Fraction(1, d**k)
    dist = tuple((x, p) for x in itertools.product(range(d), repeat=k))
    return Game(
        tuple(tuple(range(d)) for _ in range(k)),
        tuple(tuple(range(answers)) for _ in range(k)),
        dist,
        predicate if predicate is not None else AlwaysAccept(),
    )


def build_random(
    seed: int,
    k: int = 3,
    d: int = 2,
    answers: int = 2,
    support_size: int | None = None,
    accept_rate: float = 0.5,
    max_weight: int = 4,
) -> Game:
    """Seeded random game with integer-weighted support and a random accept table."""
    rng = random.Random(seed)
    cells = list(itertools.product(range(d), repeat=k))
    if support_size is None:
        support_size = rng.randint(1, len(cells))
    support_size = max(1, min(support_size, len(cells)))
    support = sorted(rng.sample(cells, support_size))
    weights = [rng.randint(1, max_weight) for _ in support]
    total = sum(weights)
    dist = tuple((x, Fraction(w, total)) for x, w in zip(support, weights))
    accepts = frozenset(
        (x, a)
        for x in support
        for a in itertools.product(range(answers), repeat=k)
        if rng.random() < accept_rate
    )
    return Game(
        tuple(tuple(range(d)) for _ in range(k)),
        tuple(tuple(range(answers)) for _ in range(k)),
        dist,
        AcceptTable(accepts),
    )


# --------------------------------------------------------------------------
# transforms


def anchor(game: Game, alpha: Fraction | int | str) -> Game:
    """Replace each player's question by ⊥ independently with probability ``alpha``."""
    alpha = Fraction(alpha)
    if not 0 < alpha < 1:
        raise GameError(f"anchoring probability must lie in (0, 1), got {alpha}")
    if any(BOTTOM in qa for qa in game.question_alphabets):
        raise GameError("game is already anchored")
    k = game.k
    bottom = tuple(len(qa) for qa in game.question_alphabets)
    dist: dict[Ids, Fraction] = {}
    for x in game.support:
        p = game.prob[x]
        for mask in itertools.product((False, True), repeat=k):
            nb = sum(mask)
            y = tuple(bottom[t] if mask[t] else x[t] for t in range(k))
            dist[y] = dist.get(y, Fraction(0)) + p * alpha**nb * (1 - alpha) ** (k - nb)
    return Game(
        tuple(qa + (BOTTOM,) for qa in game.question_alphabets),
        game.answer_alphabets,
        tuple(sorted(dist.items())),
        AnchoredPredicate(game.predicate, bottom),
    )


def bottom_ids(game: Game) -> Ids:
    """Per-player id of ⊥; raises if the game is not anchored."""
    out = []
    for t, qa in enumerate(game.question_alphabets):
        if BOTTOM not in qa:
            raise GameError(f"player {t + 1} has no anchoring symbol; game is not anchored")
        out.append(qa.index(BOTTOM))
    return tuple(out)


def repeat(game: Game, n: int) -> Game:
    """n-fold parallel repetition; the predicate stays a lazy conjunction."""
    if n < 1:
        raise GameError(f"repetition count must be >= 1, got {n}")
    qs, as_ = game.question_sizes, game.answer_sizes
    k = game.k
    dist = []
    support = game.support
    for combo in itertools.product(support, repeat=n):
        p = math.prod((game.prob[x] for x in combo), start=Fraction(1))
        dist.append((tuple(pack_ids([x[t] for x in combo], qs[t]) for t in range(k)), p))
    return Game(
        tuple(tuple(itertools.product(qa, repeat=n)) for qa in game.question_alphabets),
        tuple(tuple(itertools.product(aa, repeat=n)) for aa in game.answer_alphabets),
        tuple(sorted(dist)),
        RepeatedPredicate(game.predicate, n, qs, as_),
    )


def tensor_strategy(game: Game, parts: Sequence[tuple[int, Strategy]]) -> Strategy:
    """Play ``parts`` side by side on consecutive coordinate blocks of a repeated game.

    ``parts`` is a list of ``(n_j, strategy for repeat(game, n_j))``; the result is a
    strategy for ``repeat(game, sum n_j)``.
    """
    qs, as_ = game.question_sizes, game.answer_sizes
    n = sum(nj for nj, _ in parts)
    rep = repeat(game, n)
    maps = []
    for t in range(game.k):
        m = {}
        for q in rep.question_domain(t):
            digits = unpack_ids(q, qs[t], n)
            out: list[int] = []
            pos = 0
            for nj, strat in parts:
                sub = pack_ids(digits[pos : pos + nj], qs[t])
                out.extend(unpack_ids(strat.maps[t][sub], as_[t], nj))
                pos += nj
            m[q] = pack_ids(out, as_[t])
        maps.append(m)
    return Strategy.from_maps(maps)


def restrict(game: Game, vertices: Iterable[Ids]) -> Game:
    """The game conditioned on the question tuple lying in ``vertices``."""
    keep = set(vertices)
    mass = sum((p for x, p in game.distribution if x in keep), Fraction(0))
    if mass == 0:
        raise GameError("restriction to a zero-mass set")
    dist = tuple((x, p / mass) for x, p in game.distribution if x in keep and p > 0)
    return Game(game.question_alphabets, game.answer_alphabets, dist, game.predicate)
