"""Exponential-decay bounds on repeated-game values.

All logarithms are base 2; ``exp`` is the natural exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

FREE, ANCHORED, CONNECTED = "free", "anchored", "connected"
KINDS = (FREE, ANCHORED, CONNECTED)


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    epsilon: float | Fraction
    lam: float | Fraction
    n: int
    answer_count: int
    c: float = 1.0
    alpha: float | Fraction | None = None
    rho_min: float | Fraction | None = None
    k: int | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise BoundError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0 <= self.lam <= 1:
            raise BoundError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.answer_count < 2:
            raise BoundError("the joint answer alphabet needs at least 2 symbols")
        if self.c <= 0:
            raise BoundError("c must be positive")

    @property
    def log_answer(self) -> float:
        return math.log2(self.answer_count)


@dataclass(frozen=True)
class Bound:
    value: float
    guaranteed: bool
    note: str = ""
    exponent: float = 0.0  # natural log of value; stays finite when value underflows to 0.0


def _log2_exact(x: Fraction) -> Fraction | float:
    """log2 of a positive rational; exact when x is a power of two."""
    num, den = x.numerator, x.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return Fraction(num.bit_length() - den.bit_length())
    return math.log2(num) - math.log2(den)


def min_reps(epsilon, lam) -> int:
    """Smallest n covered by the main theorem: ceil(log2(4/eps) / (eps^5 lam^2))."""
    if epsilon <= 0 or lam <= 0:
        raise BoundError("epsilon and lambda must be positive")
    if epsilon > 1 or lam > 1:
        raise BoundError("epsilon and lambda must be at most 1")
    if isinstance(epsilon, (int, Fraction)) and isinstance(lam, (int, Fraction)):
        eps, lm = Fraction(epsilon), Fraction(lam)
        log = _log2_exact(4 / eps)
        if isinstance(log, Fraction):
            return math.ceil(log / (eps**5 * lm**2))
        return math.ceil(log / float(eps**5 * lm**2))
    return math.ceil(math.log2(4 / epsilon) / (epsilon**5 * lam**2))


def _exponent(c: float, eps, lam, n: int, log_answer: float) -> float:
    return -c * float(eps) ** 5 * float(lam) ** 2 * n / log_answer


def theorem_bound(p: BoundParams) -> Bound:
    """exp(-c eps^5 lam^2 n / log2|A|), flagged when n is below the theorem's threshold."""
    expo = _exponent(p.c, p.epsilon, p.lam, p.n, p.log_answer)
    value = math.exp(expo)
    if p.epsilon == 0:
        return Bound(1.0, False, "vacuous: epsilon = 0")
    if p.lam == 0:
        return Bound(1.0, False, "vacuous: lambda = 0 (disconnected connection graph)")
    threshold = min_reps(p.epsilon, p.lam)
    if p.n < threshold:
        return Bound(value, False, f"not guaranteed: n = {p.n} < {threshold}", expo)
    return Bound(value, True, "", expo)


def corollary_bound(kind: str, p: BoundParams) -> Bound:
    """Free, anchored and connected specialisations of the theorem."""
    if kind == FREE:
        if p.k is None:
            raise BoundError("free bound needs k")
        expo = -p.c * float(p.epsilon) ** 5 * p.n / (p.k**2 * p.log_answer)
        lam = Fraction(1, p.k)
    elif kind == ANCHORED:
        if p.alpha is None or p.k is None:
            raise BoundError("anchored bound needs alpha and k")
        a, k = p.alpha, p.k
        expo = -p.c * float(a) ** (2 * k) * float(p.epsilon) ** 5 * p.n / (64 * k**2 * p.log_answer)
        lam = Fraction(a) ** k / (8 * k) if isinstance(a, (int, Fraction)) else a**k / (8 * k)
    elif kind == CONNECTED:
        if p.rho_min is None:
            raise BoundError("connected bound needs rho_min")
        expo = -p.c * float(p.rho_min) ** 2 * float(p.epsilon) ** 5 * p.n / p.log_answer
        lam = p.rho_min
    else:
        raise BoundError(f"unknown game kind {kind!r}")
    value = math.exp(expo)
    if p.epsilon == 0:
        return Bound(1.0, False, "vacuous: epsilon = 0")
    if lam == 0:
        return Bound(1.0, False, "vacuous: lambda = 0")
    threshold = min_reps(p.epsilon, lam)
    if p.n < threshold:
        return Bound(value, False, f"not guaranteed: n = {p.n} < {threshold}", expo)
    return Bound(value, True, "", expo)


def decay_exponent(value: Fraction, n: int) -> float:
    """gamma with val = 2^(-gamma n)."""
    if value <= 0:
        return math.inf
    return -math.log2(value) / n


def largest_c(values: list[Fraction], epsilon, lam, answer_count: int) -> float | None:
    """Largest c with val(G^n) <= exp(-c eps^5 lam^2 n / log2|A|) for every measured n.

    ``values[n-1]`` is val(G^n). Returns None when the bound does not involve c
    (epsilon or lambda zero); 0 when some measured value equals 1.
    """
    scale = float(epsilon) ** 5 * float(lam) ** 2
    if scale == 0:
        return None
    log_a = math.log2(answer_count)
    best = math.inf
    for n, v in enumerate(values, start=1):
        if v <= 0:
            continue
        best = min(best, -math.log(v) * log_a / (scale * n))
    return best
