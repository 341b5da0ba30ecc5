"""Normalized Laplacian spectra and congestion certificates for connection graphs."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .game import BOTTOM, GameError, bottom_ids
from .graph import ConnectionGraph

ZERO_TOL = 1e-6


class NotSymmetric(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


def normalized_laplacian(graph: ConnectionGraph) -> np.ndarray:
    """Dense normalized Laplacian; rationals are rounded to float once, here."""
    n = len(graph.vertices)
    if n == 0:
        raise ValueError("empty connection graph")
    deg = [float(w) for w in graph.vertex_weight]
    lap = np.zeros((n, n))
    for (i, j), w in graph.weights.items():
        if i == j:
            lap[i, i] = float(1 - w / graph.vertex_weight[i])
        else:
            lap[i, j] = lap[j, i] = -float(w) / math.sqrt(deg[i] * deg[j])
    for i in range(n):
        if (i, i) not in graph.weights:
            lap[i, i] = 1.0
    return lap


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a dense symmetric matrix.

    Returns ``(eigenvalues ascending, eigenvectors as columns, sweeps)``.
    Stops once the off-diagonal Frobenius norm drops below ``tol`` times the
    total Frobenius norm.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise NotSymmetric("matrix is not square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12):
        raise NotSymmetric("matrix is not symmetric")
    a = (a + a.T) / 2
    v = np.eye(n)
    total = np.linalg.norm(a)
    sweeps = 0
    while True:
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * total:
            break
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order], sweeps


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray
    residual: float
    spectrum: np.ndarray


def lambda2(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> Eigenpair:
    """Second-smallest eigenvalue with its eigenvector and residual ``|Lv - λv|``."""
    w, v, _ = jacobi_eigh(matrix, tol, max_sweeps)
    if len(w) < 2:
        raise ValueError("a single-vertex graph has no second eigenvalue")
    vec = v[:, 1]
    residual = float(np.linalg.norm(matrix @ vec - w[1] * vec))
    return Eigenpair(float(w[1]), vec, residual, w)


def embedding_from_eigenvector(graph: ConnectionGraph, vec: np.ndarray) -> np.ndarray:
    """Map a Laplacian eigenvector y to the vertex function g = y / sqrt(rho(v))."""
    deg = np.array([float(w) for w in graph.vertex_weight])
    return np.asarray(vec, dtype=float).reshape(len(deg), -1) / np.sqrt(deg)[:, None]


def variational_upper_bound(graph: ConnectionGraph, g) -> float:
    """Rayleigh quotient of a vector-valued vertex function; always >= λ(H).

    The numerator sums over unordered vertex pairs, which makes the minimum
    over all g exactly the second eigenvalue of the normalized Laplacian.
    """
    if isinstance(g, dict):
        g = np.array([np.atleast_1d(np.asarray(g[v], dtype=float)) for v in graph.vertices])
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    deg = np.array([float(w) for w in graph.vertex_weight])
    mean = deg @ g
    den = float(deg @ np.sum((g - mean) ** 2, axis=1))
    if den <= 0.0:
        raise ValueError("g is constant on the support; the quotient is undefined")
    num = 0.0
    for (i, j), w in graph.weights.items():
        if i != j:
            num += float(w) * float(np.sum((g[i] - g[j]) ** 2))
    return num / den


# --------------------------------------------------------------------------
# canonical paths and congestion


@dataclass(frozen=True)
class CanonicalPathSet:
    paths: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    name: str = ""

    def length(self, x: int, y: int) -> int:
        return len(self.paths[(x, y)]) - 1

    @property
    def max_length(self) -> int:
        return max((len(p) - 1 for p in self.paths.values()), default=0)


class InvalidPath(ValueError):
    pass


def _reverse_complete(half: dict[tuple[int, int], tuple[int, ...]], n: int, name: str) -> CanonicalPathSet:
    paths = {}
    for x in range(n):
        paths[(x, x)] = (x,)
    for (x, y), p in half.items():
        paths[(x, y)] = p
        paths[(y, x)] = p[::-1]
    return CanonicalPathSet(paths, name)


def anchored_canonical_paths(graph: ConnectionGraph) -> CanonicalPathSet:
    """Lower differing coordinates to ⊥ in ascending order, then raise them to the target in descending order."""
    try:
        bottom = bottom_ids(graph.game)
    except GameError as exc:
        raise GameError(f"anchored paths need a ⊥-anchored game: {exc}") from None
    n = len(graph.vertices)
    half = {}
    for xi in range(n):
        x = graph.vertices[xi]
        for yi in range(xi + 1, n):
            y = graph.vertices[yi]
            delta = [t for t in range(len(x)) if x[t] != y[t]]
            cur = list(x)
            seq = [tuple(cur)]
            for t in delta:
                if cur[t] != bottom[t]:
                    cur[t] = bottom[t]
                    seq.append(tuple(cur))
            for t in reversed(delta):
                if cur[t] != y[t]:
                    cur[t] = y[t]
                    seq.append(tuple(cur))
            half[(xi, yi)] = tuple(graph.index[v] for v in seq)
    return _reverse_complete(half, n, "anchored")


def shortest_canonical_paths(graph: ConnectionGraph) -> CanonicalPathSet:
    """BFS paths from the smaller-id endpoint, neighbours visited in id order."""
    n = len(graph.vertices)
    half = {}
    for s in range(n):
        parent = {s: None}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.adjacency[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        for t in range(s + 1, n):
            if t not in parent:
                raise InvalidPath(f"vertices {graph.vertices[s]} and {graph.vertices[t]} are disconnected")
            path = [t]
            while path[-1] != s:
                path.append(parent[path[-1]])
            half[(s, t)] = tuple(path[::-1])
    return _reverse_complete(half, n, "shortest")


def validate_paths(graph: ConnectionGraph, paths: CanonicalPathSet) -> None:
    n = len(graph.vertices)
    for x in range(n):
        for y in range(n):
            p = paths.paths.get((x, y))
            if p is None:
                raise InvalidPath(f"missing path for pair {(x, y)}")
            if p[0] != x or p[-1] != y:
                raise InvalidPath(f"path for {(x, y)} has wrong endpoints")
            if len(set(p)) != len(p):
                raise InvalidPath(f"path for {(x, y)} is not simple")
            if paths.paths[(y, x)] != p[::-1]:
                raise InvalidPath(f"path for {(y, x)} is not the reverse of {(x, y)}")
            for u, v in zip(p, p[1:]):
                if graph.rho(u, v) <= 0:
                    raise InvalidPath(
                        f"path for {(x, y)} uses zero-weight edge {graph.vertices[u]}-{graph.vertices[v]}"
                    )


@dataclass(frozen=True)
class Congestion:
    zeta: Fraction
    worst_edge: tuple[int, int] | None
    loads: dict[tuple[int, int], Fraction] = field(repr=False)


def congestion(graph: ConnectionGraph, paths: CanonicalPathSet) -> Congestion:
    """Exact max over edges of load / capacity, summing over ordered pairs."""
    validate_paths(graph, paths)
    deg = graph.vertex_weight
    loads: dict[tuple[int, int], Fraction] = {}
    for (x, y), p in paths.paths.items():
        if x == y:
            continue
        amount = deg[x] * deg[y] * (len(p) - 1)
        for u, v in zip(p, p[1:]):
            e = (u, v) if u < v else (v, u)
            loads[e] = loads.get(e, Fraction(0)) + amount
    zeta, worst = Fraction(0), None
    for e in sorted(loads):
        r = loads[e] / graph.rho(*e)
        if r > zeta:
            zeta, worst = r, e
    return Congestion(zeta, worst, loads)


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class SpectralReport:
    laplacian: np.ndarray = field(repr=False)
    lambda2: float | None
    residual: float | None
    component_count: int
    zero_multiplicity: int
    spectrum: np.ndarray = field(repr=False)
    component_gaps: list[float | None]
    lower_bounds: list[dict]
    checks: list[dict]


def spectral_report(
    graph: ConnectionGraph,
    tol: float = 1e-8,
    paths: CanonicalPathSet | None = None,
) -> SpectralReport:
    lap = normalized_laplacian(graph)
    n = lap.shape[0]
    comps = graph.components
    w, v, _ = jacobi_eigh(lap)
    lam = residual = None
    if n >= 2:
        lam = float(w[1])
        vec = v[:, 1]
        residual = float(np.linalg.norm(lap @ vec - lam * vec))
    zero_mult = int(np.sum(np.abs(w) < ZERO_TOL))
    gaps: list[float | None] = []
    for comp in comps:
        if len(comp) < 2:
            gaps.append(None)
            continue
        sub = lap[np.ix_(comp, comp)]
        gaps.append(float(jacobi_eigh(sub)[0][1]))
    bounds: list[dict] = []
    checks: list[dict] = []
    sqrt_deg = np.sqrt([float(x) for x in graph.vertex_weight])
    checks.append(
        {
            "name": "spectrum within [0, 2]",
            "pass": bool(w[0] >= -tol and w[-1] <= 2 + tol),
        }
    )
    checks.append(
        {
            "name": "L sqrt(rho) = 0",
            "pass": bool(np.linalg.norm(lap @ sqrt_deg) <= tol),
        }
    )
    checks.append(
        {
            "name": "zero multiplicity equals component count",
            "pass": zero_mult == len(comps),
        }
    )
    if lam is not None and len(comps) == 1:
        rmin = graph.rho_min
        bounds.append({"source": "rho_min", "value": rmin, "certified": False})
        checks.append(
            {"name": "lambda >= rho_min (reported)", "pass": lam >= float(rmin) - tol, "asserted": False}
        )
        if paths is None:
            paths = _default_paths(graph)
        cong = congestion(graph, paths)
        bounds.append({"source": f"congestion ({paths.name} paths)", "value": 1 / cong.zeta, "certified": True})
        checks.append({"name": "lambda >= 1/zeta", "pass": lam >= float(1 / cong.zeta) - tol})
    return SpectralReport(lap, lam, residual, len(comps), zero_mult, w, gaps, bounds, checks)


def _default_paths(graph: ConnectionGraph) -> CanonicalPathSet:
    if all(BOTTOM in qa for qa in graph.game.question_alphabets):
        return anchored_canonical_paths(graph)
    return shortest_canonical_paths(graph)
