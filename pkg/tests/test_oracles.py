"""Exact reference values: the targets every statistical test is compared with."""

import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from itersurv.oracles import (
    ExactProbability,
    bm_small_dev_exact,
    bm_survival_closed_form,
    counterexample_survival_exact,
    srw_iterated_bruteforce,
    srw_iterated_enum,
    srw_max_dp,
    srw_max_enum,
    srw_max_table,
)

# simple random walk maximum


def test_srw_max_one_step():
    assert srw_max_dp(1, 0).exact == Fraction(1, 2)


def test_srw_max_four_steps():
    assert srw_max_dp(4, 0).exact == Fraction(3, 8)


def test_srw_max_sixteen_steps_central_binomial():
    r = srw_max_dp(16, 0)
    assert r.exact == Fraction(math.comb(16, 8), 2**16)
    assert r.value == pytest.approx(0.196381, abs=5e-7)
    assert r.method == "dp"


@pytest.mark.parametrize("n", range(1, 13))
def test_srw_max_dp_equals_enumeration(n):
    table = srw_max_table(n)
    for b in range(-n, n + 1):
        assert srw_max_dp(n, b).exact == table[b] == srw_max_enum(n, b).exact


def test_srw_max_float_beyond_exact_limit():
    r = srw_max_dp(100, 0)
    assert r.exact is None
    assert r.value == pytest.approx(math.comb(100, 50) / 2**100, rel=1e-12)


@given(st.integers(1, 40), st.integers(-5, 8))
def test_srw_max_monotone(n, b):
    p = srw_max_dp(n, b).exact
    assert srw_max_dp(n + 1, b).exact <= p <= srw_max_dp(n, b + 1).exact


def test_enumeration_refuses_large_n():
    with pytest.raises(ValueError):
        srw_max_enum(13, 0)


# iterated walks


def test_srw_iterated_one_step_is_one_half():
    # the query set is {1} for both inner paths, so only P(X_1 <= 0) matters
    assert srw_iterated_enum(1, 0).exact == Fraction(1, 2)


def test_srw_iterated_two_steps():
    assert srw_iterated_enum(2, 0).exact == Fraction(1, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("b", [-1, 0, 1, 2])
def test_srw_iterated_enum_equals_joint_bruteforce(n, b):
    for origin in (False, True):
        assert srw_iterated_enum(n, b, origin).exact == srw_iterated_bruteforce(n, b, origin)


@pytest.mark.parametrize("n", [1, 4, 8])
def test_srw_iterated_barrier_at_least_n_is_certain(n):
    assert srw_iterated_enum(n, n).value == 1.0
    assert srw_iterated_enum(n, n + 3).value == 1.0


def test_srw_iterated_refuses_large_n():
    with pytest.raises(ValueError):
        srw_iterated_enum(13, 0)


# Brownian motion


def test_bm_small_dev_values():
    assert bm_small_dev_exact(1.0).value == pytest.approx(0.3708, abs=5e-5)
    assert bm_small_dev_exact(0.5).value == pytest.approx(0.0091570, abs=5e-7)
    assert bm_small_dev_exact(50.0).value == pytest.approx(1.0, abs=1e-12)
    assert bm_small_dev_exact(0.5).method == "series"


def test_bm_small_dev_rate():
    vals = [bm_small_dev_exact(e).value for e in (0.15, 0.2, 0.3, 0.5, 1.0, 2.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    ratio = math.log(bm_small_dev_exact(0.2).value) / (-(math.pi**2) / 8 / 0.2**2)
    assert abs(ratio - 1) < 0.02


def test_bm_survival_closed_form():
    assert bm_survival_closed_form(1.0, 1.0).value == pytest.approx(0.682689, abs=1e-6)
    assert bm_survival_closed_form(1e-12, 1.0).value == pytest.approx(1.0)
    assert bm_survival_closed_form(1.0, 1e6).value == pytest.approx(1.0)
    t = 1e8
    scaled = bm_survival_closed_form(t, 1.0).value * math.sqrt(t)
    assert scaled == pytest.approx(math.sqrt(2 / math.pi), rel=1e-3)


# spike process


@pytest.mark.parametrize("t, want", [(0.4, Fraction(1)), (1.5, Fraction(1, 3)),
                                     (4.5, Fraction(1, 6)), (10.5, Fraction(1, 12))])
def test_counterexample_exact(t, want):
    assert counterexample_survival_exact(t).exact == want


@given(st.floats(0.01, 200.0))
def test_counterexample_formula(t):
    m = math.floor(t + 0.5)
    assert counterexample_survival_exact(t).value == pytest.approx(1 / (m + 1))


def test_exact_probability_validates():
    with pytest.raises(ValueError):
        ExactProbability(1.5, "dp")
    with pytest.raises(ValueError):
        ExactProbability(0.5, "guess")
