import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from pargame.game import anchor, build_free_uniform, build_ghz, build_random
from pargame.graph import build_connection_graph, check_invariants, rho_min


def process_weights(game):
    """Ordered-pair law of the re-sampling process: x ~ mu, t uniform, x^t re-drawn given x^{-t}."""
    k = game.k
    out = {}
    for x in game.support:
        for t in range(k):
            rest = x[:t] + x[t + 1 :]
            group = [y for y in game.support if y[:t] + y[t + 1 :] == rest]
            marginal = sum(game.prob[y] for y in group)
            for y in group:
                p = game.prob[x] * Fraction(1, k) * game.prob[y] / marginal
                out[(x, y)] = out.get((x, y), Fraction(0)) + p
    return out


def corpus():
    games = [build_ghz(), anchor(build_ghz(), Fraction(1, 2))]
    games += [build_random(s, k=2 + s % 2, d=2 + s % 3, support_size=min(32, 3 + s % 20)) for s in range(20)]
    return games


@pytest.mark.parametrize("game", corpus())
def test_weights_match_resampling_process(game):
    graph = build_connection_graph(game)
    law = process_weights(game)
    for i, j in itertools.product(range(len(graph.vertices)), repeat=2):
        x, y = graph.vertices[i], graph.vertices[j]
        assert graph.rho(i, j) == law.get((x, y), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.integers(2, 4))
def test_invariants_on_random_games(seed, k, d):
    g = build_random(seed, k=k, d=d, support_size=min(32, d**k))
    assert check_invariants(build_connection_graph(g)) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.integers(2, 3))
def test_components_match_scipy(seed, k, d):
    g = build_random(seed, k=k, d=d, support_size=max(2, d**k // 2))
    graph = build_connection_graph(g)
    n = len(graph.vertices)
    rows, cols = zip(*graph.edges()) if graph.edges() else ((), ())
    mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, labels = connected_components(mat, directed=False)
    assert len(graph.components) == count
    for comp in graph.components:
        assert len({labels[v] for v in comp}) == 1


def test_ghz_is_disconnected():
    graph = build_connection_graph(build_ghz())
    assert len(graph.components) == 4
    assert graph.edges() == []
    assert all(w == Fraction(1, 4) for w in graph.weights.values())
    assert rho_min(graph) == Fraction(1, 4)


def test_free_game_weights():
    graph = build_connection_graph(build_free_uniform(2, 2))
    # neighbours in one coordinate: (1/4)(1/4) / (2 * 1/2)
    assert graph.rho(0, 1) == Fraction(1, 16)
    assert graph.rho(0, 3) == 0
    # self-loop: (1/2)(1/4)(1/2 + 1/2); row sum 1/8 + 2/16 = mu(x)
    assert graph.rho(0, 0) == Fraction(1, 8)


def test_anchored_ghz_connected():
    graph = build_connection_graph(anchor(build_ghz(), Fraction(1, 2)))
    assert len(graph.components) == 1
    assert check_invariants(graph) == []
