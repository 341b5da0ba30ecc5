"""Exact classical values by exhaustive strategy enumeration.

Two methods are provided:

* ``plain-exhaustive`` enumerates complete strategies for all k players; the
  last player's tables are scored in vectorised batches.
* ``best-response`` enumerates players 1..k-1 only and fills in player k's
  table in closed form (per question, the answer with the largest accepted
  mass, smallest answer id on ties). Outer prefixes whose optimistic bound
  cannot beat the incumbent are skipped.

Probabilities are scaled to integers by the common denominator of the
support so the inner loops stay in int64; values are returned as Fractions.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .game import Game, Strategy, check_strategy, constant_strategy, repeat

PLAIN = "plain-exhaustive"
BEST_RESPONSE = "best-response"
METHODS = (PLAIN, BEST_RESPONSE)

DEFAULT_BUDGET = 2**32
CHUNK = 4096
ITEMS_PER_BLOCK = 64


class BudgetExceeded(RuntimeError):
    def __init__(self, message: str, partial: "ValueResult | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class ValueResult:
    value: Fraction
    witness: Strategy
    enumerated_count: int
    method: str
    complete: bool = True
    space: int = 0


def win_probability(game: Game, strategy: Strategy) -> Fraction:
    """Exact success probability of a deterministic strategy."""
    check_strategy(game, strategy)
    total = Fraction(0)
    for x in game.support:
        if game.accepts(x, strategy.answer(x)):
            total += game.prob[x]
    return total


class _Tables:
    """Precomputed integer data shared by both search methods (read-only)."""

    def __init__(self, game: Game):
        self.game = game
        self.k = game.k
        support = game.support
        self.denom = math.lcm(*(game.prob[x].denominator for x in support))
        self.weights = np.array([int(game.prob[x] * self.denom) for x in support], dtype=np.int64)
        self.domains = [game.question_domain(t) for t in range(self.k)]
        pos = [{q: i for i, q in enumerate(dom)} for dom in self.domains]
        self.qidx = [np.array([pos[t][x[t]] for x in support], dtype=np.int64) for t in range(self.k)]
        self.na = list(game.answer_sizes)
        self.counts = [self.na[t] ** len(self.domains[t]) for t in range(self.k)]
        acc = np.zeros((len(support),) + tuple(self.na), dtype=bool)
        for s, x in enumerate(support):
            for a in game.answer_tuples():
                if game.accepts(x, a):
                    acc[(s,) + a] = True
        self.acc = acc
        self.srange = np.arange(len(support))
        self.nsupp = len(support)

    def decode(self, t: int, start: int, stop: int) -> np.ndarray:
        """Answer tables ``start..stop-1`` of player t, one row each (lexicographic order)."""
        width = len(self.domains[t])
        j = np.arange(start, stop, dtype=np.int64)
        out = np.empty((stop - start, width), dtype=np.int64)
        for p in range(width - 1, -1, -1):
            j, out[:, p] = np.divmod(j, self.na[t])
        return out

    def decode_one(self, t: int, index: int) -> list[int]:
        width = len(self.domains[t])
        out = [0] * width
        for p in range(width - 1, -1, -1):
            index, out[p] = divmod(index, self.na[t])
        return out

    def strategy(self, rows: list[list[int]]) -> Strategy:
        return Strategy.from_maps(
            [dict(zip(self.domains[t], map(int, rows[t]))) for t in range(self.k)]
        )

    def score(self, strategy: Strategy) -> int:
        ans = [np.array([strategy.maps[t][q] for q in self.domains[t]]) for t in range(self.k)]
        idx = (self.srange,) + tuple(ans[t][self.qidx[t]] for t in range(self.k))
        return int(self.weights[self.acc[idx]].sum())


def _outer_index(tab: _Tables, players: int, o: int) -> list[list[int]]:
    """Decode a mixed-radix index over the tables of players 0..players-1."""
    rows = []
    for t in range(players - 1, -1, -1):
        o, r = divmod(o, tab.counts[t])
        rows.append(tab.decode_one(t, r))
    return rows[::-1]


def _fix_outer(tab: _Tables, rows: list[list[int]]) -> np.ndarray:
    """Slice of the accept table with the outer players' answers substituted per support tuple."""
    idx = [tab.srange]
    for t, row in enumerate(rows):
        idx.append(np.asarray(row, dtype=np.int64)[tab.qidx[t]])
    return tab.acc[tuple(idx)]


class _Search:
    def __init__(self, game: Game, method: str, seed: Strategy | None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.tab = tab = _Tables(game)
        self.method = method
        k = tab.k
        # players enumerated in Python loops, then one vectorised player
        if method == PLAIN:
            self.outer_players, self.inner = k - 1, k - 1
        elif k == 1:
            self.outer_players, self.inner = 0, None
        else:
            self.outer_players, self.inner = k - 2, k - 2
        self.outer_count = math.prod(tab.counts[: self.outer_players])
        self.inner_count = tab.counts[self.inner] if self.inner is not None else 1
        self.space = self.outer_count * self.inner_count
        if method == BEST_RESPONSE:
            onehot = np.zeros((tab.nsupp, len(tab.domains[k - 1])), dtype=np.int64)
            onehot[tab.srange, tab.qidx[k - 1]] = 1
            self.group = onehot * tab.weights[:, None]
        seed = seed if seed is not None else constant_strategy(game)
        self.threshold = tab.score(seed)

    # -- work items: (outer index, inner chunk start)

    def items(self):
        for o in range(self.outer_count):
            for start in range(0, self.inner_count, CHUNK):
                yield o, start

    def outer_bound(self, part: np.ndarray) -> int:
        """Optimistic value with only the outer players fixed (best-response only)."""
        # part: (S, na_{k-1}, na_k); player k consistent per question, k-1 free per tuple
        best = part.any(axis=1).astype(np.int64)  # (S, na_k)
        per_q = self.group.T @ best  # (|dom_k|, na_k)
        return int(per_q.max(axis=1).sum())

    def evaluate(self, o: int, start: int, stop: int, part: np.ndarray):
        """Best (score, index offset, extra rows) inside one chunk."""
        tab = self.tab
        if self.method == PLAIN:
            t = tab.k - 1
            tables = tab.decode(t, start, stop)
            cols = tables[:, tab.qidx[t]]  # (c, S)
            won = part[tab.srange[None, :], cols]  # (c, S)
            scores = won.astype(np.int64) @ tab.weights
            j = int(np.argmax(scores))
            return int(scores[j]), j, [list(map(int, tables[j]))]
        t = self.inner
        if t is None:  # single-player game: pure best response
            m = part[:, :]  # (S, na_0)
            per_q = self.group.T @ m.astype(np.int64)
            return int(per_q.max(axis=1).sum()), 0, [list(map(int, per_q.argmax(axis=1)))]
        tables = tab.decode(t, start, stop)
        cols = tables[:, tab.qidx[t]]  # (c, S)
        won = part[tab.srange[None, :], cols, :]  # (c, S, na_k)
        per_q = np.einsum("csa,sq->cqa", won.astype(np.int64), self.group)
        scores = per_q.max(axis=2).sum(axis=1)
        j = int(np.argmax(scores))
        reply = per_q[j].argmax(axis=1)
        return int(scores[j]), j, [list(map(int, tables[j])), list(map(int, reply))]

    def part_for(self, o: int):
        tab = self.tab
        rows = _outer_index(tab, self.outer_players, o)
        if self.inner is None:
            return rows, tab.acc
        return rows, _fix_outer(tab, rows)

    def run_block(self, items: list[tuple[int, int]], budget: int | None = None):
        """Scan items in order; returns (best score, best rows, evaluated count, truncated)."""
        best_score, best_rows = -1, None
        evaluated = 0
        cached_o, rows, part, pruned = None, None, None, False
        for o, start in items:
            if o != cached_o:
                cached_o = o
                rows, part = self.part_for(o)
                pruned = False
                if self.method == BEST_RESPONSE and self.inner is not None:
                    ub = self.outer_bound(part)
                    pruned = ub < self.threshold or ub <= best_score
            if pruned:
                continue
            stop = min(start + CHUNK, self.inner_count)
            if budget is not None:
                stop = min(stop, start + budget - evaluated)
                if stop <= start:
                    return best_score, best_rows, evaluated, True
            score, j, extra = self.evaluate(o, start, stop, part)
            evaluated += stop - start
            if score > best_score:
                best_score, best_rows = score, rows + extra
        return best_score, best_rows, evaluated, False


def game_value(
    game: Game,
    method: str = BEST_RESPONSE,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    seed: Strategy | None = None,
) -> ValueResult:
    """val(game) as an exact Fraction with a witness strategy.

    Raises :class:`BudgetExceeded` when the enumeration space is larger than
    ``budget``; the exception carries the best strategy found within the
    budget (an incomplete lower bound).
    """
    search = _Search(game, method, seed)
    tab = search.tab
    if search.space > budget:
        score, rows, evaluated, _ = search.run_block(list(_islice_items(search, budget)), budget)
        seed_strategy = seed if seed is not None else constant_strategy(game)
        if rows is None or score < search.threshold:
            witness, score = seed_strategy, search.threshold
        else:
            witness = tab.strategy(rows)
        partial = ValueResult(
            Fraction(score, tab.denom), witness, evaluated, method, complete=False, space=search.space
        )
        raise BudgetExceeded(
            f"{method} search space {search.space} exceeds budget {budget}", partial
        )
    items = list(search.items())
    blocks = [items[i : i + ITEMS_PER_BLOCK] for i in range(0, len(items), ITEMS_PER_BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(search.run_block, blocks))
    else:
        results = [search.run_block(b) for b in blocks]
    best_score, best_rows, evaluated = -1, None, 0
    for score, rows, count, _ in results:  # block order = lexicographic order
        evaluated += count
        if score > best_score:
            best_score, best_rows = score, rows
    witness = tab.strategy(best_rows)
    return ValueResult(Fraction(best_score, tab.denom), witness, evaluated, method, True, search.space)


def _islice_items(search: _Search, budget: int):
    covered = 0
    for o, start in search.items():
        if covered >= budget:
            return
        yield o, start
        covered += min(CHUNK, search.inner_count - start)


def search_space(game: Game, method: str = BEST_RESPONSE) -> int:
    """Number of candidate tables the chosen method scans, without building any tables."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    counts = [game.answer_sizes[t] ** len(game.question_domain(t)) for t in range(game.k)]
    if method == PLAIN:
        return math.prod(counts)
    return math.prod(counts[:-1])


@dataclass(frozen=True)
class ValueSequence:
    values: list[Fraction]
    witnesses: list[Strategy]
    truncated: bool
    reason: str = ""


def value_sequence(
    game: Game,
    n_max: int,
    method: str = BEST_RESPONSE,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
) -> ValueSequence:
    """val(G^n) for n = 1..n_max, truncated at the first level over budget."""
    values, witnesses = [], []
    for n in range(1, n_max + 1):
        rep = repeat(game, n)
        # checked first so an oversized level costs nothing
        space = search_space(rep, method)
        if space > budget:
            return ValueSequence(values, witnesses, True, f"n={n}: {method} search space {space} exceeds budget {budget}")
        res = game_value(rep, method, budget, threads)
        values.append(res.value)
        witnesses.append(res.witness)
    return ValueSequence(values, witnesses, False)


def brute_force_value(game: Game) -> Fraction:
    """Pure-Python enumeration over every strategy profile; tiny games only."""
    domains = [game.question_domain(t) for t in range(game.k)]
    per_player = [
        list(itertools.product(range(game.answer_sizes[t]), repeat=len(domains[t])))
        for t in range(game.k)
    ]
    best = Fraction(0)
    for profile in itertools.product(*per_player):
        maps = [dict(zip(domains[t], profile[t])) for t in range(game.k)]
        v = sum(
            (game.prob[x] for x in game.support if game.accepts(x, tuple(maps[t][x[t]] for t in range(game.k)))),
            Fraction(0),
        )
        best = max(best, v)
    return best


def improve_strategy(game: Game, strategy: Strategy, max_rounds: int = 100) -> tuple[Strategy, Fraction]:
    """Deterministic best-response ascent from ``strategy``.

    Players are revised in order; each question's answer moves only on a
    strict improvement (smallest answer id among the best). Stops at a fixed
    point or after ``max_rounds`` passes.
    """
    check_strategy(game, strategy)
    maps = [dict(m) for m in strategy.maps]
    k = game.k
    for _ in range(max_rounds):
        changed = False
        for t in range(k):
            gain: dict = {}
            for x in game.support:
                p = game.prob[x]
                row = gain.setdefault(x[t], [Fraction(0)] * game.answer_sizes[t])
                a = [maps[u][x[u]] for u in range(k)]
                for b in range(game.answer_sizes[t]):
                    a[t] = b
                    if game.accepts(x, tuple(a)):
                        row[b] += p
            for q, row in gain.items():
                best = max(row)
                if row[maps[t][q]] < best:
                    maps[t][q] = row.index(best)
                    changed = True
        if not changed:
            break
    out = Strategy.from_maps(maps)
    return out, win_probability(game, out)
