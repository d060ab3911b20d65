"""The compiled kernels and the numpy fallback must give the same answers."""

import numpy as np
import pytest

from itersurv import _backend
from itersurv.engine import SurvivalJob, run_job
from itersurv.fluctuation import (
    ladder_height_tail_probe,
    normalized_barrier_check,
    small_deviation_curve,
    sup_abs_samples,
)
from itersurv.processes import (
    ChainSpec,
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

pytestmark = pytest.mark.skipif("compiled" not in _backend.available(),
                                reason="compiled core not built")

LEVY = LevySpec(diffusion=1.0, jump_rate=1.0, jump_law=Laplace(0.5, 1.0), centered=True)

JOBS = {
    "bm": SurvivalJob(brownian(), 16.0, step=0.25, seed=1),
    "srw": SurvivalJob(RandomWalkSpec(), 30.0, barrier=2.0, seed=2),
    "levy": SurvivalJob(LEVY, 8.0, step=0.125, seed=3),
    "spikes": SurvivalJob(CounterexampleSpec(), 4.5, seed=4),
    "levy-at-rw": SurvivalJob(LEVY, 64.0, inner=RandomWalkSpec(Gaussian(0.3, 1.0)), seed=5),
    "two-sided-levy-at-rw": SurvivalJob(TwoSidedSpec(LEVY, LEVY), 64.0, inner=RandomWalkSpec(),
                                        mode="two-sided", seed=6),
    "bm-at-bm": SurvivalJob(brownian(), 32.0, inner=brownian(), inner_steps=64, seed=7),
    "bm-at-ibm": SurvivalJob(brownian(), 32.0, inner=IbmSpec(1), inner_steps=64, seed=8),
    "bm-at-chain": SurvivalJob(brownian(), 32.0, inner=ChainSpec(2), inner_steps=64, seed=9),
    "two-sided-bm": SurvivalJob(TwoSidedSpec(brownian(), brownian()), 32.0, inner=brownian(),
                                mode="two-sided", inner_steps=64, seed=10),
    "fbm-outer": SurvivalJob(FbmSpec(0.7, True), 16.0, inner=brownian(), mode="two-sided",
                             step=1.0, seed=11),
}


@pytest.mark.parametrize("name", sorted(JOBS))
def test_survival_agrees(name):
    job = JOBS[name]
    a_ok, a_max = run_job(job, 0, 300, backend="compiled")
    b_ok, b_max = run_job(job, 0, 300, backend="python")
    assert np.array_equal(a_ok, b_ok)
    assert np.allclose(a_max, b_max, rtol=1e-9, atol=1e-9)


def test_probes_agree():
    a = small_deviation_curve(brownian(), [0.5, 1.0], 300, seed=1, backend="compiled")
    b = small_deviation_curve(brownian(), [0.5, 1.0], 300, seed=1, backend="python")
    assert [p.n_hits for p in a] == [p.n_hits for p in b]
    x = sup_abs_samples(IbmSpec(1), 200, seed=2, backend="compiled")
    y = sup_abs_samples(IbmSpec(1), 200, seed=2, backend="python")
    assert np.allclose(x, y, rtol=1e-9)
    r1 = normalized_barrier_check(Rademacher(), 1000, 0.4, 300, seed=3, backend="compiled")
    r2 = normalized_barrier_check(Rademacher(), 1000, 0.4, 300, seed=3, backend="python")
    assert r1.estimate.n_hits == r2.estimate.n_hits
    t1 = ladder_height_tail_probe(Laplace(0.0, 1.0), 300, seed=4, backend="compiled")
    t2 = ladder_height_tail_probe(Laplace(0.0, 1.0), 300, seed=4, backend="python")
    assert np.allclose(t1.heights, t2.heights, rtol=1e-9)


def test_threads_do_not_change_results():
    job = JOBS["levy-at-rw"]
    a = run_job(job, 0, 2000, backend="compiled", nthreads=1)
    b = run_job(job, 0, 2000, backend="compiled", nthreads=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("gpu")
