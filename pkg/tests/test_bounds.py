import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pargame.bounds import (
    ANCHORED,
    CONNECTED,
    FREE,
    BoundError,
    BoundParams,
    corollary_bound,
    decay_exponent,
    largest_c,
    min_reps,
    theorem_bound,
)
from pargame.game import anchor, build_ghz, build_random
from pargame.graph import build_connection_graph
from pargame.spectral import lambda2, normalized_laplacian

unit = st.floats(0.01, 1.0)


def test_min_reps_values():
    assert min_reps(1, 1) == 2
    assert min_reps(Fraction(1, 4), Fraction(1, 3)) == 36864


def test_min_reps_float_path():
    assert min_reps(1.0, 1.0) == 2


@settings(max_examples=50)
@given(st.integers(1, 64).map(lambda d: Fraction(1, d)), st.integers(1, 64).map(lambda d: Fraction(1, d)))
def test_halving_lambda_quadruples_threshold(eps, lam):
    a, b = min_reps(eps, lam), min_reps(eps, lam / 2)
    assert 4 * a - 3 <= b <= 4 * a


@pytest.mark.parametrize("eps, lam", [(0, Fraction(1, 2)), (Fraction(1, 2), 0), (2, 1)])
def test_min_reps_rejects(eps, lam):
    with pytest.raises(BoundError):
        min_reps(eps, lam)


@settings(max_examples=100)
@given(unit, unit, st.integers(1, 10**6), st.integers(2, 64), st.floats(0.01, 10))
def test_theorem_bound_range_and_monotone(eps, lam, n, answers, c):
    p = BoundParams(eps, lam, n, answers, c=c)
    b = theorem_bound(p)
    assert 0 <= b.value <= 1
    assert b.exponent < 0
    assert b.value == math.exp(b.exponent)
    assert theorem_bound(BoundParams(eps, lam, n + 1, answers, c=c)).exponent < b.exponent


def test_vacuous_bounds():
    b = theorem_bound(BoundParams(0, 0.5, 10, 4))
    assert b.value == 1 and not b.guaranteed and "epsilon" in b.note
    b = theorem_bound(BoundParams(0.5, 0, 10, 4))
    assert b.value == 1 and not b.guaranteed and "lambda" in b.note


def test_below_threshold_flagged_but_computed():
    b = theorem_bound(BoundParams(Fraction(1, 4), Fraction(1, 3), 100, 8))
    assert not b.guaranteed
    assert b.value == pytest.approx(math.exp(-(0.25**5) * (1 / 9) * 100 / 3), rel=1e-12)
    assert theorem_bound(BoundParams(1, 1, 2, 4)).guaranteed


@pytest.mark.parametrize("bad", [dict(epsilon=1.5), dict(lam=-0.1), dict(answer_count=1), dict(c=0)])
def test_params_validated(bad):
    kw = dict(epsilon=0.5, lam=0.5, n=3, answer_count=4)
    kw.update(bad)
    with pytest.raises(BoundError):
        BoundParams(**kw)


@settings(max_examples=100)
@given(unit, st.integers(2, 5), st.integers(1, 10**5), st.integers(2, 64), st.floats(0.1, 5))
def test_free_corollary_is_theorem_at_inverse_k(eps, k, n, answers, c):
    free = corollary_bound(FREE, BoundParams(eps, 0.5, n, answers, c=c, k=k))
    thm = theorem_bound(BoundParams(eps, 1 / k, n, answers, c=c))
    assert free.exponent == pytest.approx(thm.exponent, rel=1e-12)


@settings(max_examples=100)
@given(unit, st.floats(0.05, 0.95), st.integers(2, 4), st.integers(1, 10**6), st.integers(2, 64))
def test_anchored_corollary_is_theorem_at_certified_gap(eps, alpha, k, n, answers):
    anch = corollary_bound(ANCHORED, BoundParams(eps, 0.5, n, answers, alpha=alpha, k=k))
    thm = theorem_bound(BoundParams(eps, alpha**k / (8 * k), n, answers))
    assert anch.exponent == pytest.approx(thm.exponent, rel=1e-12)


@settings(max_examples=100)
@given(unit, st.floats(0.01, 1), st.integers(1, 10**6), st.integers(2, 64))
def test_connected_corollary_is_theorem_at_rho_min(eps, rmin, n, answers):
    con = corollary_bound(CONNECTED, BoundParams(eps, 0.5, n, answers, rho_min=rmin))
    thm = theorem_bound(BoundParams(eps, rmin, n, answers))
    assert con.exponent == pytest.approx(thm.exponent, rel=1e-12)


def test_free_with_two_players_is_theorem_at_half():
    p = BoundParams(Fraction(1, 3), Fraction(1, 2), 500, 4, k=2)
    assert corollary_bound(FREE, p).value == pytest.approx(theorem_bound(p).value, rel=1e-12)


@pytest.mark.parametrize("kind", [FREE, ANCHORED, CONNECTED, "other"])
def test_corollary_missing_params(kind):
    with pytest.raises(BoundError):
        corollary_bound(kind, BoundParams(0.5, 0.5, 3, 4))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("alpha", [Fraction(1, 10), Fraction(1, 4), Fraction(2, 5)])
def test_measured_gap_gives_stronger_bound_than_anchored_form(seed, alpha):
    base = build_ghz() if seed == 0 else build_random(seed, k=2, d=2)
    g = anchor(base, alpha)
    lam = lambda2(normalized_laplacian(build_connection_graph(g))).value
    p = BoundParams(Fraction(1, 10), min(lam, 1.0), 10**6, g.answer_count, alpha=alpha, k=g.k)
    assert theorem_bound(p).value <= corollary_bound(ANCHORED, p).value * (1 + 1e-12)


def test_decay_exponent():
    assert decay_exponent(Fraction(1, 4), 2) == 1
    assert decay_exponent(Fraction(0), 3) == math.inf


def test_largest_c_is_tight():
    values = [Fraction(3, 4), Fraction(5, 8)]
    eps, lam, answers = 0.25, 0.5, 8
    c = largest_c(values, eps, lam, answers)
    for n, v in enumerate(values, start=1):
        assert v <= theorem_bound(BoundParams(eps, lam, n, answers, c=c)).value * (1 + 1e-12)
    assert any(
        v > theorem_bound(BoundParams(eps, lam, n, answers, c=c * 1.001)).value for n, v in enumerate(values, start=1)
    )
    assert largest_c(values, 0, lam, answers) is None
