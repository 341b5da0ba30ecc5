"""The (k-1)-connection graph of a game.

Vertices are the positive-mass question tuples. Two tuples are joined when
they differ in exactly one player's question; the weight is the probability
of drawing the pair by sampling x from the question distribution, a uniform
player t, and re-sampling player t's question conditioned on the others.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .game import Game, Ids


@dataclass(frozen=True)
class ConnectionGraph:
    game: Game = field(repr=False)
    vertices: tuple[Ids, ...]
    # (i, j) with i <= j -> weight; diagonal stored explicitly, zero weights omitted
    weights: dict[tuple[int, int], Fraction] = field(repr=False)

    @cached_property
    def index(self) -> dict[Ids, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def vertex_weight(self) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * len(self.vertices)
        for (i, j), w in self.weights.items():
            out[i] += w
            if i != j:
                out[j] += w
        return tuple(out)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in self.vertices]
        for (i, j), w in self.weights.items():
            if i != j and w > 0:
                nbrs[i].append(j)
                nbrs[j].append(i)
        return tuple(tuple(sorted(n)) for n in nbrs)

    def rho(self, i: int, j: int) -> Fraction:
        return self.weights.get((i, j) if i <= j else (j, i), Fraction(0))

    def edges(self) -> list[tuple[int, int]]:
        """Off-diagonal positive-weight pairs (i < j)."""
        return sorted(e for e, w in self.weights.items() if e[0] != e[1] and w > 0)

    @property
    def rho_min(self) -> Fraction:
        return rho_min(self)

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        return components(self)


def build_connection_graph(game: Game) -> ConnectionGraph:
    k = game.k
    verts = game.support
    index = {v: i for i, v in enumerate(verts)}
    mu = game.prob
    weights: dict[tuple[int, int], Fraction] = {}
    diag = [Fraction(0)] * len(verts)
    for t in range(k):
        groups: dict[Ids, list[Ids]] = {}
        for x in verts:
            groups.setdefault(x[:t] + x[t + 1 :], []).append(x)
        for members in groups.values():
            marginal = sum((mu[x] for x in members), Fraction(0))
            for x in members:
                diag[index[x]] += mu[x] / marginal  # P(x^t | x^{-t})
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    i, j = sorted((index[members[a]], index[members[b]]))
                    weights[(i, j)] = mu[members[a]] * mu[members[b]] / (k * marginal)
    for i, x in enumerate(verts):
        weights[(i, i)] = mu[x] * diag[i] / k
    return ConnectionGraph(game, verts, dict(sorted(weights.items())))


def components(graph: ConnectionGraph) -> tuple[tuple[int, ...], ...]:
    """Connected components over positive off-diagonal weights, sorted by smallest vertex."""
    seen = [False] * len(graph.vertices)
    out = []
    for s in range(len(graph.vertices)):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        out.append(tuple(sorted(comp)))
    return tuple(out)


def rho_min(graph: ConnectionGraph) -> Fraction:
    positive = [w for w in graph.weights.values() if w > 0]
    if not positive:
        raise ValueError("empty connection graph")
    return min(positive)


def check_invariants(graph: ConnectionGraph) -> list[str]:
    """Exact checks of symmetry, row sums, total mass and single-coordinate edges."""
    problems = []
    mu = graph.game.prob
    for i, x in enumerate(graph.vertices):
        if graph.vertex_weight[i] != mu[x]:
            problems.append(f"row sum at {x} is {graph.vertex_weight[i]}, expected {mu[x]}")
    total = sum(
        (w if i == j else 2 * w for (i, j), w in graph.weights.items()), Fraction(0)
    )
    if total != 1:
        problems.append(f"total mass {total} != 1")
    for (i, j), w in graph.weights.items():
        if i > j:
            problems.append(f"weight stored under unordered key {(i, j)}")
        if i != j and w > 0:
            diff = sum(a != b for a, b in zip(graph.vertices[i], graph.vertices[j]))
            if diff != 1:
                problems.append(f"edge {graph.vertices[i]}-{graph.vertices[j]} differs in {diff} coordinates")
    # symmetry is structural (one stored value per unordered pair); check the accessor agrees
    for (i, j) in graph.weights:
        if graph.rho(i, j) != graph.rho(j, i):
            problems.append(f"asymmetric weight at {(i, j)}")
    return problems
