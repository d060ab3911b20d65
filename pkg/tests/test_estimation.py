import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itersurv.engine import SurvivalJob
from itersurv.estimation import (
    ExperimentPlan,
    ExponentFit,
    SurvivalEstimate,
    estimate_survival,
    fit_exponent,
    run_experiment,
    wilson_interval,
)
from itersurv.oracles import counterexample_survival_exact, srw_max_dp
from itersurv.processes import (
    ConfigurationError,
    CounterexampleSpec,
    RandomWalkSpec,
    brownian,
)

SRW = RandomWalkSpec()


# Wilson intervals


def test_wilson_boundaries():
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0


def test_wilson_half():
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)


@given(st.integers(1, 10**6), st.data(), st.floats(0.5, 0.999))
def test_wilson_contains_estimate(n, data, level):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n, level)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_wilson_validates():
    with pytest.raises(ValueError):
        wilson_interval(3, 2)
    with pytest.raises(ValueError):
        wilson_interval(1, 2, 1.0)


# estimates


@given(st.integers(1, 10**7), st.data())
def test_estimate_invariants(n, data):
    e = SurvivalEstimate(10.0, 1.0, n, data.draw(st.integers(0, n)))
    assert e.n_survived <= e.n_samples and e.p_hat == e.n_survived / e.n_samples
    assert e.ci_low <= e.p_hat <= e.ci_high


def test_estimate_rejects_bad_counts():
    with pytest.raises(ConfigurationError):
        SurvivalEstimate(1.0, 1.0, 0, 0)
    with pytest.raises(ConfigurationError):
        SurvivalEstimate(1.0, 1.0, 5, 6)


def test_unreachable_barrier():
    e = estimate_survival(SurvivalJob(brownian(), 16.0, barrier=1e9), 2000)
    assert e.p_hat == 1.0


def test_srw_baseline_matches_dp():
    e = estimate_survival(SurvivalJob(SRW, 16.0, barrier=0.0, seed=1), 10**6, level=0.99)
    assert e.contains(srw_max_dp(16, 0).value)


def test_counterexample_baseline_matches_oracle():
    e = estimate_survival(SurvivalJob(CounterexampleSpec(), 1.5, seed=2), 10**5, level=0.99)
    assert e.contains(counterexample_survival_exact(1.5).value)


def test_estimates_are_reproducible_and_batch_free():
    job = SurvivalJob(SRW, 40.0, barrier=2.0, seed=3)
    a = estimate_survival(job, 5000)
    b = estimate_survival(job, 5000)
    assert a == b


# exponent fits


def test_exact_power_law():
    f = fit_exponent([(t, t**-0.5) for t in (10, 100, 1000)])
    assert abs(f.slope + 0.5) < 1e-9 and f.r_squared == pytest.approx(1.0)


def test_constant_probability():
    f = fit_exponent([(t, 0.3) for t in (10, 100, 1000)])
    assert abs(f.slope) < 1e-9


def test_power_law_with_constant():
    f = fit_exponent([(t, 5 * t**-0.25) for t in (16, 64, 256, 1024)])
    assert abs(f.slope + 0.25) < 1e-9 and abs(f.intercept - math.log(5)) < 1e-9
    assert f.slope_stderr == pytest.approx(0.0, abs=1e-9)


@given(st.floats(-2.0, 0.0), st.floats(-3.0, 3.0),
       st.lists(st.floats(1.0, 1e6), min_size=2, max_size=8, unique=True))
def test_exact_fit_recovers_any_line(slope, logc, ts):
    if max(ts) / min(ts) < 1.01:
        return
    f = fit_exponent([(t, math.exp(logc) * t**slope) for t in ts], k_min=0)
    assert f.slope == pytest.approx(slope, abs=1e-7)
    assert f.slope_stderr >= 0 and f.points_used >= 2


@settings(max_examples=30)
@given(st.floats(0.05, 20.0), st.floats(-1.0, 0.0))
def test_fit_is_scale_invariant_in_time(c, slope):
    pts = [(t, min(1.0, 0.9 * t**slope), 10**5) for t in (2.0, 8.0, 32.0, 128.0)]
    a = fit_exponent(pts)
    b = fit_exponent([(c * t, p, n) for t, p, n in pts])
    assert a.slope == pytest.approx(b.slope, abs=1e-9)


def test_fit_excludes_sparse_points():
    pts = [SurvivalEstimate(t, 1.0, 1000, k) for t, k in ((1, 500), (4, 250), (16, 50), (64, 3))]
    f = fit_exponent(pts, k_min=10)
    assert f.points_used == 3 and f.excluded == (64,)
    with pytest.raises(ValueError):
        fit_exponent(pts, k_min=400)


def test_fit_rejects_mixed_inputs():
    with pytest.raises(ValueError):
        fit_exponent([(1.0, 0.5), (4.0, 0.25, 1000)])


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        ExponentFit(-0.5, 0.0, 0.0, 1.0, 1)


def test_deviation_from_prediction():
    f = fit_exponent([(t, t**-0.3) for t in (2, 4, 8)]).with_prediction(0.25, "demo")
    assert f.deviation == pytest.approx(0.05)


# plans


def test_plan_horizons_and_budgets():
    plan = ExperimentPlan(SurvivalJob(brownian(), 1.0), t0=4, ratio=2, count=3,
                          n_min=100, n_max=1000, c_budget=50)
    assert plan.horizons == [4, 8, 16]
    assert plan.sample_budgets(0.5) == [100, 142, 200]
    assert plan.sample_budgets(3.0) == [1000] * 3
    assert [j.horizon for j in plan.jobs()] == [4, 8, 16]
    assert [j.grid_index for j in plan.jobs()] == [0, 1, 2]


@pytest.mark.parametrize("kw", [
    {"budgets": (0, 0)}, {"budgets": (10, -1)}, {"ratio": 1.0}, {"t0": 0.5}, {"count": 1},
    {"n_min": 10, "n_max": 5}, {"c_budget": 0.0}, {"grid": (4.0, 2.0)},
])
def test_plan_errors(kw):
    base = {"t0": 1.0, "ratio": 2.0, "count": 2}
    with pytest.raises(ConfigurationError):
        ExperimentPlan(SurvivalJob(brownian(), 1.0), **{**base, **kw})


def test_counterexample_experiment():
    plan = ExperimentPlan(SurvivalJob(CounterexampleSpec(), 1.5, seed=7),
                          grid=(1.5, 4.5, 10.5), budgets=(100_000,) * 3, level=0.99)
    res = run_experiment(plan)
    for e in res.estimates:
        assert e.contains(counterexample_survival_exact(e.horizon).value)
    exact = fit_exponent([(t, counterexample_survival_exact(t).value) for t in (1.5, 4.5, 10.5)])
    assert res.fit.slope == pytest.approx(exact.slope, abs=0.05)
    assert np.isfinite(res.fit.slope_stderr)
