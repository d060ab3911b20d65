import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from itersurv.generators import (
    MAX_CHOLESKY_POINTS,
    fgn_autocovariance,
    gen_counterexample_values,
    gen_fbm_path,
    gen_ibm_path,
    gen_levy_path,
    gen_path,
    gen_random_walk,
    ibm_step_covariance,
    sample_fgn,
)
from itersurv.processes import (
    ConfigurationError,
    Constant,
    CounterexampleSpec,
    FbmSpec,
    Gaussian,
    IbmSpec,
    Laplace,
    LevySpec,
    Rademacher,
    SignedWeibull,
    TimeGrid,
    TwoSidedSpec,
    brownian,
)
from itersurv.rng import derive_stream


def stream(i, scenario=0, channel=0, seed=42):
    return derive_stream(seed, (scenario, 0, i, channel))


def within_5_sigma(estimate, target, sd):
    return abs(estimate - target) <= 5 * sd


# random walks


def test_constant_walk():
    assert gen_random_walk(3, Constant(1.0), stream(0)).values.tolist() == [0, 1, 2, 3]
    assert not gen_random_walk(5, Constant(0.0), stream(0)).values.any()


def test_gaussian_walk_law_of_large_numbers():
    n, paths = 10**4, 10**3
    means = [gen_random_walk(n, Gaussian(0.5, 1.0), stream(i, 1)).values[-1] / n
             for i in range(paths)]
    assert within_5_sigma(np.mean(means), 0.5, 1 / math.sqrt(n * paths))


@settings(max_examples=30)
@given(st.integers(1, 300), st.integers(0, 10**6))
def test_rademacher_unit_steps(n, i):
    v = gen_random_walk(n, Rademacher(), stream(i)).values
    assert v[0] == 0 and np.all(np.abs(np.diff(v)) == 1)


def test_walk_rejects_bad_steps():
    with pytest.raises(ConfigurationError):
        gen_random_walk(0, Rademacher(), stream(0))


@pytest.mark.parametrize("law", [Laplace(0.0, 1.0), SignedWeibull(0.5, 1.0, 0.2),
                                 Gaussian(-1.0, 2.0)])
def test_increment_laws_mean_and_variance(law):
    n = 200_000
    x = np.diff(gen_random_walk(n, law, stream(3, 2)).values)
    assert within_5_sigma(x.mean(), law.mean, math.sqrt(law.variance / n))
    assert x.var() == pytest.approx(law.variance, rel=0.05)


# Levy processes


def test_pure_drift_levy():
    path = gen_levy_path(TimeGrid(0.5, 3), LevySpec(drift=2.0, diffusion=0.0), stream(0))
    assert np.allclose(path.values, [0, 1, 2, 3])


def test_brownian_variance_at_one():
    n = 10**5
    x = np.array([gen_levy_path(TimeGrid(0.25, 4), brownian(), stream(i, 4)).values[-1]
                  for i in range(n)])
    assert within_5_sigma(x.var(), 1.0, math.sqrt(2 / n))


def test_centered_levy_has_mean_zero():
    spec = LevySpec(diffusion=0.0, jump_rate=1.0, jump_law=Laplace(1.0, 1.0), centered=True)
    assert spec.drift == -1.0
    n = 10**5
    x = np.array([gen_levy_path(TimeGrid(1.0, 1), spec, stream(i, 5)).values[-1]
                  for i in range(n)])
    assert within_5_sigma(x.mean(), 0.0, math.sqrt(spec.second_moment / n))


def test_degenerate_levy_rejected():
    with pytest.raises(ConfigurationError):
        LevySpec(diffusion=0.0)


# integrated Brownian motion


def test_ibm_step_covariance_entries():
    assert ibm_step_covariance(0, 2.0)[0, 0] == pytest.approx(2.0)
    c = ibm_step_covariance(1, 1.0)
    assert c[0, 1] == pytest.approx(0.5)
    assert c[1, 1] == pytest.approx(1 / 3)


@given(st.integers(0, 5), st.floats(0.01, 4.0))
def test_ibm_step_covariance_closed_form(order, h):
    c = ibm_step_covariance(order, h)
    for j in range(order + 1):
        for k in range(order + 1):
            want = h ** (j + k + 1) / (math.factorial(j) * math.factorial(k) * (j + k + 1))
            assert c[j, k] == pytest.approx(want, rel=1e-12)


def test_ibm_marginal_variance():
    # Var Y^(n)_1 = 1 / ((n!)^2 (2n + 1))
    n_paths = 20_000
    for order in (1, 2):
        y = np.array([gen_ibm_path(TimeGrid(0.125, 8), IbmSpec(order), stream(i, 6)).values[-1]
                      for i in range(n_paths)])
        want = 1 / (math.factorial(order) ** 2 * (2 * order + 1))
        assert within_5_sigma(y.var(), want, want * math.sqrt(2 / n_paths))


def test_ibm_zero_is_brownian_motion():
    a = gen_ibm_path(TimeGrid(0.5, 6), IbmSpec(0), stream(0, 7))
    assert a.values[0] == 0 and len(a.values) == 7


def test_brownian_self_similarity():
    n = 10**4
    sups = []
    for k, horizon in enumerate((1.0, 4.0)):
        grid = TimeGrid.over(horizon, horizon / 64)
        sups.append([np.abs(gen_levy_path(grid, brownian(), stream(i, 8 + k)).values).max()
                     / math.sqrt(horizon) for i in range(n)])
    assert ks_2samp(sups[0], sups[1]).statistic < 1.949 * math.sqrt(2 / n)


# fractional Brownian motion


@pytest.mark.parametrize("h", [0.25, 0.5, 0.75])
def test_two_sided_fbm_covariance_at_plus_minus_one(h):
    n = 10**5
    grid = TimeGrid(0.25, 4)
    pairs = np.array([(p.values[-1], p.minus[-1]) for p in
                      (gen_fbm_path(grid, FbmSpec(h, True), stream(i, 10)) for i in range(n))])
    x, y = pairs[:, 0], pairs[:, 1]
    want = 0.5 * (2 - 2 ** (2 * h))
    prod = x * y
    assert within_5_sigma(prod.mean(), want, prod.std() / math.sqrt(n))
    assert within_5_sigma(x.var(), 1.0, math.sqrt(2 / n))


@pytest.mark.parametrize("h", [0.2, 0.5, 0.8])
def test_fgn_increment_variance(h):
    n, dt = 50_000, 0.1
    x = np.array([sample_fgn(h, 16, dt, stream(i, 11))[0][5] for i in range(n)])
    want = dt ** (2 * h)
    assert within_5_sigma(x.var(), want, want * math.sqrt(2 / n))


def test_fgn_autocovariance_of_brownian_noise_is_white():
    g = fgn_autocovariance(0.5, 5, 0.3)
    assert g[0] == pytest.approx(0.3)
    assert np.allclose(g[1:], 0.0)


def test_fbm_method_is_reported():
    p = gen_fbm_path(TimeGrid(0.1, 50), FbmSpec(0.7), stream(0))
    assert p.meta["method"] in ("circulant", "cholesky")


def test_cholesky_fallback_limit():
    assert MAX_CHOLESKY_POINTS == 4096


# spike process


def test_counterexample_entries():
    n = 10**5
    v = np.array([gen_counterexample_values(9, stream(i, 12)) for i in range(n)])
    assert set(np.unique(v)) <= {0.0, 2.0}
    for idx, p in ((0, 0.5), (8, 0.1)):
        hits = (v[:, idx] == 2).mean()
        assert within_5_sigma(hits, p, math.sqrt(p * (1 - p) / n))


# all families


@pytest.mark.parametrize("spec", [brownian(), IbmSpec(2), FbmSpec(0.3), FbmSpec(0.6, True),
                                  CounterexampleSpec(), TwoSidedSpec(brownian(), IbmSpec(1)),
                                  LevySpec(diffusion=0.2, jump_rate=3.0,
                                           jump_law=SignedWeibull(0.5, 1.0))])
def test_paths_start_at_zero(spec):
    p = gen_path(spec, TimeGrid(0.25, 12), stream(1), stream(1, channel=2))
    assert p.values[0] == 0.0
    if p.minus is not None:
        assert p.minus[0] == 0.0
