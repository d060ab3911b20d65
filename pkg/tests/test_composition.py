import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itersurv.composition import (
    CompositionMode,
    CompositionSpec,
    DenseRange,
    ExactAtQueries,
    build_queries,
    compose_survival_indicator,
    evaluate_gaussian_at,
    evaluate_levy_at,
    fbm_covariance,
)
from itersurv.engine import SurvivalJob
from itersurv.estimation import estimate_survival, wilson_interval
from itersurv.generators import gen_path, gen_random_walk
from itersurv.processes import (
    ConfigurationError,
    CounterexampleSpec,
    FbmSpec,
    Gaussian,
    Laplace,
    LevySpec,
    PathSkeleton,
    Rademacher,
    RandomWalkSpec,
    TimeGrid,
    TwoSidedSpec,
    brownian,
)
from itersurv.rng import derive_stream

ONE = CompositionMode.ONE_SIDED_ABS
TWO = CompositionMode.TWO_SIDED
LEVY = LevySpec(diffusion=1.0, jump_rate=1.0, jump_law=Laplace(0.5, 1.0), centered=True)


def streams(i, scenario=0):
    return tuple(derive_stream(11, (scenario, 0, i, c)) for c in (1, 2))


# query sets


def test_queries_one_sided():
    qp, qm = build_queries(PathSkeleton.from_values([0, 0.5, -1.0]), ONE)
    assert qp.values.tolist() == [0.5, 1.0] and len(qm) == 0


def test_queries_two_sided():
    qp, qm = build_queries(PathSkeleton.from_values([0, 0.5, -1.0]), TWO)
    assert qp.values.tolist() == [0.5] and qm.values.tolist() == [1.0]


def test_queries_all_zero():
    qp, qm = build_queries(PathSkeleton.from_values([0, 0, 0]), TWO)
    assert qp.values.tolist() == [0.0] and len(qm) == 0


@given(st.lists(st.integers(-6, 6), min_size=1, max_size=40), st.sampled_from([ONE, TWO]))
def test_query_backmap_is_total(steps, mode):
    values = np.array([0] + steps, dtype=float)
    qp, qm = build_queries(PathSkeleton.from_values(values), mode)
    for q in (qp, qm):
        assert np.all(np.diff(q.values) > 0)
    for k, v in enumerate(values[1:]):
        if mode is ONE or v >= 0:
            assert qp.values[qp.backmap[k]] == abs(v)
        else:
            assert qm.values[qm.backmap[k]] == -v


# outer evaluation


def test_levy_at_origin_is_zero():
    assert evaluate_levy_at(np.array([0.0]), LEVY, streams(0)[0]).tolist() == [0.0]


def test_pure_drift_at_queries():
    v = evaluate_levy_at(np.array([0.5, 1.5]), LevySpec(drift=2.0, diffusion=0.0), streams(0)[0])
    assert np.allclose(v, [1.0, 3.0])


def test_brownian_variance_at_query():
    n = 10**5
    x = np.array([evaluate_levy_at(np.array([0.7, 2.0]), brownian(), streams(i, 1)[0])[1]
                  for i in range(n)])
    assert abs(x.var() - 2.0) <= 5 * 2.0 * math.sqrt(2 / n)


def test_levy_increment_law_over_gaps():
    n = 20_000
    q = np.array([0.3, 1.0, 2.5])
    v = np.array([evaluate_levy_at(q, LEVY, streams(i, 2)[0]) for i in range(n)])
    inc = np.diff(np.column_stack([np.zeros(n), v]), axis=1)
    for j, gap in enumerate(np.diff(np.concatenate([[0.0], q]))):
        var = gap * LEVY.second_moment
        assert abs(inc[:, j].mean()) <= 5 * math.sqrt(var / n)
        assert abs(inc[:, j].var() - var) <= 5 * var * math.sqrt(5 / n)


def test_gaussian_empty_and_single_query():
    cov = fbm_covariance(0.7)
    assert len(evaluate_gaussian_at(np.array([]), cov, streams(0)[0])) == 0
    n = 10**5
    x = np.array([evaluate_gaussian_at(np.array([1.7]), cov, streams(i, 3)[0])[0]
                  for i in range(n)])
    want = cov(1.7, 1.7)
    assert abs(x.var() - want) <= 5 * want * math.sqrt(2 / n)


def test_brownian_branches_are_uncorrelated():
    n = 10**5
    cov = fbm_covariance(0.5)
    xy = np.array([evaluate_gaussian_at(np.array([-1.0, 1.0]), cov, streams(i, 4)[0])
                   for i in range(n)])
    prod = xy[:, 0] * xy[:, 1]
    assert abs(prod.mean()) <= 5 * prod.std() / math.sqrt(n)


def test_gaussian_rejects_indefinite_covariance():
    with pytest.raises(Exception, match="covariance"):
        evaluate_gaussian_at(np.array([1.0, 2.0]), lambda s, t: np.where(s == t, 1.0, -2.0),
                             streams(0)[0])


# survival indicator


@pytest.mark.parametrize("outer", [LEVY, brownian(), LevySpec(drift=5.0, diffusion=0.0)])
def test_zero_inner_always_survives(outer):
    inner = PathSkeleton.from_values(np.zeros(6))
    for mode in (ONE, TWO):
        ok, mx = compose_survival_indicator(outer, inner, 1.0, mode, ExactAtQueries(), streams(0))
        assert ok and mx == 0.0


def test_counterexample_at_integer_inner_is_zero():
    for i in range(50):
        inner = gen_random_walk(30, Gaussian(0.0, 3.0), derive_stream(1, (0, 0, i, 0)))
        inner = PathSkeleton(inner.grid, np.round(inner.values))
        ok, mx = compose_survival_indicator(CounterexampleSpec(), inner, 1.0, ONE,
                                            ExactAtQueries(), streams(i))
        assert ok and mx == 0.0


def test_iterated_walk_two_steps():
    job = SurvivalJob(RandomWalkSpec(), 2.0, barrier=0.0, inner=RandomWalkSpec(), seed=5)
    est = estimate_survival(job, 200_000)
    lo, hi = wilson_interval(est.n_survived, est.n_samples, 0.99)
    assert lo <= 0.5 <= hi


def test_dense_needs_continuous_inner():
    with pytest.raises(ConfigurationError):
        CompositionSpec(brownian(), RandomWalkSpec(), strategy=DenseRange())
    with pytest.raises(ConfigurationError):
        compose_survival_indicator(brownian(), PathSkeleton.from_values([0, 1, 2]), 1.0, ONE,
                                   DenseRange(), streams(0))


def test_default_strategy_by_inner_type():
    assert isinstance(CompositionSpec(brownian(), brownian()).strategy, DenseRange)
    assert isinstance(CompositionSpec(brownian(), RandomWalkSpec()).strategy, ExactAtQueries)


def test_one_sided_fbm_rejected_in_two_sided_mode():
    inner = PathSkeleton.from_values([0, 1.0, -1.0])
    with pytest.raises(ConfigurationError):
        compose_survival_indicator(FbmSpec(0.6), inner, 1.0, TWO, ExactAtQueries(), streams(0))


# properties


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(-1.0, 2.0), st.floats(0.0, 2.0),
       st.sampled_from([ONE, TWO]))
def test_barrier_monotonicity(i, b1, gap, mode):
    inner = gen_random_walk(40, Rademacher(), derive_stream(2, (0, 0, i, 0)))
    outer = TwoSidedSpec(LEVY, brownian())
    got = [compose_survival_indicator(outer, inner, b, mode, ExactAtQueries(), streams(i),
                                      stop_above=math.inf)
           for b in (b1, b1 + gap)]
    assert got[0][1] == got[1][1]
    assert got[0][0] <= got[1][0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["exact", "dense"]))
def test_nonnegative_inner_one_and_two_sided_agree(i, kind):
    if kind == "exact":
        inner = gen_random_walk(30, Rademacher(), derive_stream(3, (0, 0, i, 0)))
        inner = PathSkeleton(inner.grid, np.abs(inner.values))
        strategy = ExactAtQueries()
    else:
        sub = LevySpec(drift=1.0, diffusion=0.0, jump_rate=1.0, jump_law=Laplace(1.0, 0.1))
        inner = gen_path(sub, TimeGrid(0.25, 40), derive_stream(3, (0, 0, i, 0)))
        inner = PathSkeleton(inner.grid, np.maximum.accumulate(np.abs(inner.values)),
                             meta={"continuous": True})
        strategy = DenseRange(0.05)
    outer = TwoSidedSpec(LEVY, brownian())
    one = compose_survival_indicator(LEVY, inner, 1.0, ONE, strategy, streams(i))
    two = compose_survival_indicator(outer, inner, 1.0, TWO, strategy, streams(i))
    assert one == two


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=2, max_size=30), st.integers(0, 10**6))
def test_repeated_query_values_share_one_outer_value(steps, i):
    # doubling every inner value adds no new query times, so the composed maximum is unchanged
    values = np.array([0] + steps, dtype=float)
    doubled = np.repeat(values, 2)[1:]
    a = compose_survival_indicator(LEVY, PathSkeleton.from_values(values), 1.0, TWO,
                                   ExactAtQueries(), streams(i), stop_above=math.inf)
    b = compose_survival_indicator(LEVY, PathSkeleton.from_values(doubled), 1.0, TWO,
                                   ExactAtQueries(), streams(i), stop_above=math.inf)
    assert a == b
