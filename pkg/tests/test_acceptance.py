"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary, and also when this file is run directly with python3.
"""

import itertools
import json
import time
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pytest

from pargame.bounds import ANCHORED, CONNECTED, FREE, BoundParams, corollary_bound, min_reps, theorem_bound
from pargame.cli import run
from pargame.game import anchor, build_free_uniform, build_ghz, build_random, repeat, validate
from pargame.graph import build_connection_graph, check_invariants
from pargame.io import fixture_path, parse_game_file, strategy_from_dict
from pargame.rounding import pipeline
from pargame.spectral import anchored_canonical_paths, congestion, lambda2, normalized_laplacian, validate_paths
from pargame.value import BEST_RESPONSE, PLAIN, game_value, search_space, win_probability

FIXTURES = Path(__file__).parent / "fixtures"
RESULTS: list[str] = []
ALPHAS = [Fraction(1, 10), Fraction(1, 4), Fraction(2, 5)]


def record(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
    if detail:
        line += f" ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_corpus():
    """100+ random games with k in {2, 3} and at most 32 support tuples."""
    games = []
    for seed in range(120):
        k = 2 + seed % 2
        d = 2 + seed // 2 % 3 if k == 2 else 2 + seed // 2 % 2
        support = min(32, d**k, 2 + seed % 31)
        games.append(build_random(seed, k=k, d=d, answers=2, support_size=support))
    return games


@lru_cache(maxsize=None)
def rounding_run(name: str, n: int):
    game = anchor(build_ghz(), Fraction(1, 2)) if name == "anchored" else build_ghz()
    start = time.perf_counter()
    rep = pipeline(game, n)
    return rep, time.perf_counter() - start


def test_criterion_01_ghz_value():
    timings, values = [], []
    for method in (PLAIN, BEST_RESPONSE):
        start = time.perf_counter()
        values.append(game_value(build_ghz(), method).value)
        timings.append(time.perf_counter() - start)
    ok = values == [Fraction(3, 4)] * 2 and max(timings) < 1.0
    record(1, "val(GHZ) = 3/4 by both methods in < 1 s", ok, f"values {values}, max {max(timings):.3f} s")


def test_criterion_02_ghz_graph():
    graph = build_connection_graph(build_ghz())
    lam = lambda2(normalized_laplacian(graph)).value
    off = [w for (i, j), w in graph.weights.items() if i != j]
    ok = len(graph.components) == 4 and all(w == 0 for w in off) and abs(lam) <= 1e-8
    record(2, "GHZ connection graph has 4 components, no edges, lambda = 0", ok, f"lambda {lam:.2e}")


def test_criterion_03_free_games():
    worst_lam, worst_entry = 0.0, 0.0
    for k, d in itertools.product((2, 3), (2, 3, 4)):
        graph = build_connection_graph(build_free_uniform(k, d))
        lap = normalized_laplacian(graph)
        worst_lam = max(worst_lam, abs(lambda2(lap).value - 1 / k))
        for (i, x), (j, y) in itertools.product(enumerate(graph.vertices), repeat=2):
            diff = sum(a != b for a, b in zip(x, y))
            want = 1 - 1 / d if i == j else (-1 / (k * d) if diff == 1 else 0.0)
            worst_entry = max(worst_entry, abs(lap[i, j] - want))
    ok = worst_lam <= 1e-8 and worst_entry <= 1e-12
    record(3, "free games: lambda = 1/k and closed-form Laplacian", ok, f"max errors {worst_lam:.1e}, {worst_entry:.1e}")


def test_criterion_04_graph_invariants():
    games = random_corpus()
    fixtures = [parse_game_file(fixture_path("ghz.game"))]
    assert len(games) >= 100
    assert all(2 <= g.k <= 3 and len(g.support) <= 32 for g in games)
    bad = []
    for g in games + fixtures:
        assert validate(g) == []
        bad += check_invariants(build_connection_graph(g))
    record(4, "connection-graph invariants hold exactly", not bad, f"{len(games)} random games + {len(fixtures)} fixture")


def test_criterion_05_anchored_certificates():
    bases = [build_ghz()] + [build_random(1000 + s, k=2 + s % 2, d=2) for s in range(10)]
    failures = []
    for base, alpha in itertools.product(bases, ALPHAS):
        graph = build_connection_graph(anchor(base, alpha))
        k = base.k
        lam = lambda2(normalized_laplacian(graph)).value
        paths = anchored_canonical_paths(graph)
        validate_paths(graph, paths)
        zeta = congestion(graph, paths).zeta
        if not (
            lam >= float(alpha**k / (8 * k)) - 1e-8
            and zeta <= 8 * k / alpha**k
            and lam >= float(1 / zeta) - 1e-8
            and paths.max_length <= 2 * k
        ):
            failures.append((k, alpha, lam, zeta))
    record(5, "anchored games: gap, congestion and path-length certificates", not failures, f"{len(bases) * len(ALPHAS)} games")


def test_criterion_06_value_laws():
    # spaces are checked up front: an over-budget call still spends its budget on a partial result
    start = time.perf_counter()
    br_budget, plain_budget = 2**20, 2**16
    failures, checked_pairs, compared = [], 0, 0
    for g in random_corpus():
        v1 = game_value(g, BEST_RESPONSE).value
        if game_value(g, PLAIN).value != v1:
            failures.append("methods differ on G")
        rep = repeat(g, 2)
        if search_space(rep, BEST_RESPONSE) <= br_budget:
            v2 = game_value(rep, BEST_RESPONSE, budget=br_budget).value
            checked_pairs += 1
            if not v1**2 <= v2 <= v1:
                failures.append(f"repetition law {v1} {v2}")
            if search_space(rep, PLAIN) <= plain_budget:
                compared += 1
                if game_value(rep, PLAIN, budget=plain_budget).value != v2:
                    failures.append("methods differ on G^2")
        alpha = Fraction(1, 4)
        va = game_value(anchor(g, alpha), BEST_RESPONSE).value
        if va != 1 - (1 - alpha) ** g.k * (1 - v1):
            failures.append("anchor law")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed <= 300
    record(6, "value laws on the corpus", ok, f"{checked_pairs} squared games, {compared} plain cross-checks, {elapsed:.0f} s")


def test_criterion_07_ghz2_fixture():
    start = time.perf_counter()
    g = repeat(build_ghz(), 2)
    fast = game_value(g, BEST_RESPONSE)
    oracle = game_value(g, PLAIN)
    data = json.loads((FIXTURES / "ghz2_value.json").read_text())
    witness = strategy_from_dict(g, data["witness"])
    elapsed = time.perf_counter() - start
    ok = (
        fast.value == oracle.value == Fraction(data["value"])
        and win_probability(g, witness) == oracle.value
        and elapsed <= 120
    )
    record(7, "val(GHZ^2) optimized = plain-exhaustive = committed fixture", ok, f"value {fast.value}, {elapsed:.1f} s")


@pytest.mark.parametrize("n", [2, 3])
def test_criterion_08_rounding_pipeline(n):
    rep, elapsed = rounding_run("anchored", n)
    coords = rep.coordinates
    parts = {
        "a": rep.independence.ok,
        "b": rep.undefined == "" and rep.single_exact == rep.ws_average,
        "c": abs(rep.single_tilde - float(rep.single_exact)) <= rep.average_distance,
        "d": all(c.dist.hellinger_violations == 0 for c in coords),
        "e": all(c.dist.max_unit_error <= 1e-12 and c.dist.p_tilde_sum_error <= 1e-12 for c in coords),
    }
    ok = all(parts.values()) and elapsed <= 600
    failed = "".join(k for k, v in parts.items() if not v)
    record(
        8,
        f"rounding pipeline on anchored GHZ, n = {n}",
        ok,
        f"S = {[j + 1 for j in rep.subset.S]}, distance {rep.average_distance:.3g}, {elapsed:.0f} s"
        + (f", failed ({failed})" if failed else ""),
    )


def test_criterion_09_negative_control():
    raw = [rounding_run("ghz", n)[0].average_distance for n in (2, 3)]
    anch = [rounding_run("anchored", n)[0].average_distance for n in (2, 3)]
    # trend only: no constant; 1e-12 absorbs float noise between equal values
    ok = raw[1] > 0 and raw[1] >= raw[0] - 1e-12 and anch[1] <= anch[0] + 1e-12
    record(9, "disconnected GHZ keeps its distance, anchored does not grow", ok, f"GHZ {raw}, anchored {anch}")


def test_criterion_10_bounds():
    worst = 0.0
    for eps, k, n, answers in itertools.product([0.05, 0.3, 1.0], [2, 3, 4], [10, 10**4, 10**7], [2, 8, 64]):
        c = 0.7
        free = corollary_bound(FREE, BoundParams(eps, 1.0, n, answers, c=c, k=k))
        thm = theorem_bound(BoundParams(eps, 1 / k, n, answers, c=c))
        worst = max(worst, abs(free.exponent - thm.exponent) / abs(thm.exponent))
        for alpha in ALPHAS:
            a = corollary_bound(ANCHORED, BoundParams(eps, 1.0, n, answers, c=c, alpha=alpha, k=k))
            t = theorem_bound(BoundParams(eps, float(alpha) ** k / (8 * k), n, answers, c=c))
            worst = max(worst, abs(a.exponent - t.exponent) / abs(t.exponent))
        for rmin in (0.01, 0.2):
            cn = corollary_bound(CONNECTED, BoundParams(eps, 1.0, n, answers, c=c, rho_min=rmin))
            t = theorem_bound(BoundParams(eps, rmin, n, answers, c=c))
            worst = max(worst, abs(cn.exponent - t.exponent) / abs(t.exponent))
    reps = (min_reps(1, 1), min_reps(Fraction(1, 4), Fraction(1, 3)))
    ok = worst <= 1e-12 and reps == (2, 36864)
    record(10, "corollaries coincide with the theorem; min_reps values", ok, f"max rel error {worst:.1e}, min_reps {reps}")


DETERMINISM_COMMANDS = [
    ["validate", "--gen", "ghz", "--anchor", "1/2"],
    ["graph", "--gen", "random", "--k", "3", "--seed", "5"],
    ["spectral", "--gen", "ghz", "--anchor", "1/4"],
    ["congestion", "--gen", "ghz", "--anchor", "2/5"],
    ["value", "--gen", "ghz", "--reps", "2"],
    ["value", "--gen", "random", "--k", "3", "--d", "3", "--seed", "9", "--method", "plain-exhaustive"],
    ["bound", "--gen", "ghz", "--reps", "10", "--c", "1", "--value-reps", "2"],
    ["anchor", "--gen", "random", "--k", "3", "--seed", "2", "--anchor", "1/10"],
    ["repeat", "--gen", "ghz", "--reps", "2"],
    ["roundsim", "--gen", "ghz", "--anchor", "1/2", "--reps", "2"],
    ["roundsim", "--gen", "ghz", "--reps", "3"],
]


def test_criterion_11_determinism():
    differing = []
    for argv in DETERMINISM_COMMANDS:
        texts = {run(argv + ["--threads", str(t)])[1] for t in (1, 2, 8)}
        if len(texts) != 1:
            differing.append(argv[0])
    record(11, "reports byte-identical across 1, 2 and 8 workers", not differing, f"{len(DETERMINISM_COMMANDS)} commands")


if __name__ == "__main__":
    import sys

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion")]
    failed = 0
    for t in tests:
        args = [[2], [3]] if t is test_criterion_08_rounding_pipeline else [[]]
        for a in args:
            try:
                t(*a)
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
