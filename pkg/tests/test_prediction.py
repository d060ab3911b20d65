import pytest
from hypothesis import given
from hypothesis import strategies as st

from itersurv.composition import CompositionSpec
from itersurv.engine import SurvivalJob
from itersurv.prediction import baseline_exponent, predicted_exponent
from itersurv.processes import (
    ChainSpec,
    Constant,
    CounterexampleSpec,
    FbmSpec,
    Gaussian,
    IbmSpec,
    Laplace,
    LevySpec,
    Rademacher,
    RandomWalkSpec,
    TwoSidedSpec,
    brownian,
)

BM = brownian()
LEVY = LevySpec(diffusion=1.0, jump_rate=1.0, jump_law=Laplace(0.5, 1.0), centered=True)


def pred(outer, inner, mode="one-sided-abs"):
    return predicted_exponent(CompositionSpec(outer, inner, mode))


def test_bm_at_bm():
    p = pred(BM, BM)
    assert p.theta == 0.25 and p.theorem == "self-similar-inner"


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bm_at_integrated_bm(n):
    assert pred(BM, IbmSpec(n)).theta == pytest.approx((2 * n + 1) / 4)


def test_two_sided_bm_at_bm():
    p = pred(TwoSidedSpec(BM, BM), BM, "two-sided")
    assert p.theta == 0.5 and p.theorem == "two-sided-self-similar-inner"


def test_levy_at_drifted_walk():
    p = pred(LEVY, RandomWalkSpec(Gaussian(0.3, 1.0)))
    assert p.theta == 0.5 and p.theorem == "levy-at-rw-drifted"


def test_levy_at_centered_walk():
    p = pred(LEVY, RandomWalkSpec(Rademacher()))
    assert p.theta == 0.25 and p.theorem == "levy-at-rw-centered"


@given(st.floats(0.05, 0.95))
def test_fbm_outer_does_not_depend_on_hurst(h):
    p = pred(FbmSpec(h, True), BM, "two-sided")
    assert p.theta == 0.5 and p.theorem == "fbm-two-sided-self-similar-inner"


@pytest.mark.parametrize("inner", [RandomWalkSpec(Rademacher()), RandomWalkSpec(Gaussian(1, 1))])
def test_two_sided_levy_at_walk_ignores_drift(inner):
    assert pred(TwoSidedSpec(LEVY, LEVY), inner, "two-sided").theta == 0.5


def test_subordinated_symmetric_levy():
    sub = LevySpec(drift=0.5, diffusion=0.0, jump_rate=1.0, jump_law=Constant(1.0))
    outer = LevySpec(diffusion=1.0, jump_rate=1.0, jump_law=Laplace(0.0, 1.0))
    p = pred(outer, sub)
    assert p.theta == 0.5 and p.theorem == "symmetric-levy-at-subordinator"


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_chain_inner(depth):
    assert pred(BM, ChainSpec(depth)).theta == pytest.approx(0.5 * 2.0**-depth)


def test_baselines():
    assert baseline_exponent(BM).theta == 0.5
    assert baseline_exponent(RandomWalkSpec()).theta == 0.5
    assert baseline_exponent(IbmSpec(1)).theta == 0.25
    assert baseline_exponent(FbmSpec(0.7)).theta == pytest.approx(0.3)
    assert baseline_exponent(CounterexampleSpec()).theta == 1.0


@pytest.mark.parametrize("outer, inner, mode", [
    (LevySpec(drift=1.0, diffusion=1.0), RandomWalkSpec(), "one-sided-abs"),
    (BM, RandomWalkSpec(Constant(0.0)), "one-sided-abs"),
    (LEVY, BM, "two-sided"),
    (CounterexampleSpec(), RandomWalkSpec(), "one-sided-abs"),
    (TwoSidedSpec(BM, BM), BM, "one-sided-abs"),
])
def test_no_rule_gives_none(outer, inner, mode):
    p = pred(outer, inner, mode)
    assert p.theta is None and p.theorem == "none" and p.warnings


def test_prediction_from_job():
    job = SurvivalJob(BM, 10.0, inner=IbmSpec(1))
    assert predicted_exponent(job).theta == pytest.approx(0.75)
    assert predicted_exponent(SurvivalJob(BM, 10.0)).theta == 0.5
