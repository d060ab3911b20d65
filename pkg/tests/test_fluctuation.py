import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from itersurv.fluctuation import (
    barrier_target,
    ladder_decomposition,
    ladder_height_tail_probe,
    negative_moment_estimate,
    normalized_barrier_check,
    running_extrema,
    small_deviation_curve,
)
from itersurv.oracles import bm_small_dev_exact
from itersurv.processes import (
    ConfigurationError,
    Constant,
    Gaussian,
    Laplace,
    LevySpec,
    PathSkeleton,
    Rademacher,
    brownian,
)

paths = st.lists(st.integers(-5, 5), min_size=1, max_size=60).map(
    lambda steps: np.concatenate([[0.0], np.cumsum(steps)])
)


# running extrema


def test_running_extrema_examples():
    r = running_extrema(PathSkeleton.from_values([0, 1, -2, 3]))
    assert r.maxima.tolist() == [1, 1, 3] and r.minima.tolist() == [1, -2, -2]
    r = running_extrema(PathSkeleton.from_values([0, 1, 2, 3]))
    assert r.maxima.tolist() == [1, 2, 3] and r.minima.tolist() == [1, 1, 1]
    r = running_extrema(PathSkeleton.from_values([0, 2.5, 2.5]))
    assert r.maxima.tolist() == r.minima.tolist() == [2.5, 2.5]


@given(paths)
def test_running_extrema_are_monotone_and_ordered(v):
    r = running_extrema(v)
    assert np.all(np.diff(r.maxima) >= 0) and np.all(np.diff(r.minima) <= 0)
    assert np.all(r.minima <= r.maxima)
    assert np.all(r.minima <= v[1:]) and np.all(v[1:] <= r.maxima)


def test_extrema_need_a_step():
    with pytest.raises(ValueError):
        running_extrema([0.0])


# ladder epochs


def test_ladder_examples():
    d = ladder_decomposition(PathSkeleton.from_values([0, 1, -1, 2, 0, 3]))
    assert d.epochs.tolist() == [1, 3, 5] and d.heights.tolist() == [1, 1, 1]
    assert len(ladder_decomposition(PathSkeleton.from_values([0, -1, -2]))) == 0
    d = ladder_decomposition(PathSkeleton.from_values([0, -1, -2]), "descending")
    assert d.epochs.tolist() == [1, 2] and d.heights.tolist() == [1, 1]


def test_ladder_direction_validated():
    with pytest.raises(ValueError):
        ladder_decomposition([0, 1], "sideways")


@given(paths, st.sampled_from(["ascending", "descending"]))
def test_ladder_heights_reconstruct_records(v, direction):
    d = ladder_decomposition(v, direction)
    sign = 1 if direction == "ascending" else -1
    assert np.all(d.heights > 0)
    assert np.allclose(np.cumsum(d.heights), sign * v[d.epochs])
    # the last record is the overall running maximum (clipped at the anchor)
    r = running_extrema(v)
    top = r.maxima[-1] if direction == "ascending" else -r.minima[-1]
    assert (np.sum(d.heights) if len(d) else 0.0) == max(0.0, top)


@given(paths)
def test_ladder_mirror(v):
    a = ladder_decomposition(-v, "ascending")
    b = ladder_decomposition(v, "descending")
    assert np.array_equal(a.epochs, b.epochs) and np.allclose(a.heights, b.heights)


# small deviations


def test_small_deviation_huge_level_is_certain():
    (p,) = small_deviation_curve(brownian(), [100.0], 2000, seed=1)
    assert p.n_hits == p.n_samples


def test_small_deviation_matches_series():
    pts = small_deviation_curve(brownian(), [0.5, 1.0], 100_000, seed=2, level=0.99)
    for p in pts:
        assert p.contains(bm_small_dev_exact(p.level).value)


def test_small_deviation_monotone_in_level():
    pts = small_deviation_curve(brownian(), [1.0, 0.5, 0.75, 2.0], 20_000, seed=3)
    by_level = sorted(pts, key=lambda p: p.level)
    hits = [p.n_hits for p in by_level]
    assert hits == sorted(hits)


def test_small_deviation_rejects_bad_levels():
    with pytest.raises(ConfigurationError):
        small_deviation_curve(brownian(), [0.0], 10)
    with pytest.raises(ConfigurationError):
        small_deviation_curve(brownian(), [], 10)


# negative moments


def test_negative_moment_of_constant_sup():
    m = negative_moment_estimate(LevySpec(drift=2.0, diffusion=0.0), 0.7, 1000)
    assert m.mean == 2.0**-0.7 and m.stderr == 0.0


def test_zeroth_negative_moment_is_one():
    m = negative_moment_estimate(brownian(), 0.0, 1000)
    assert m.mean == 1.0


def test_brownian_negative_moment_is_stable():
    m = negative_moment_estimate(brownian(), 0.5, 100_000, seed=4)
    assert math.isfinite(m.mean) and not m.heavy_tail
    # two disjoint sample blocks agree
    other = negative_moment_estimate(brownian(), 0.5, 100_000, seed=4, start=100_000)
    assert abs(m.mean - other.mean) <= 5 * math.hypot(m.stderr, other.stderr)


# normalized barrier


def test_barrier_targets():
    assert barrier_target(Rademacher()) == pytest.approx(math.sqrt(2 / math.pi))
    assert barrier_target(Gaussian(0.0, 2.0)) == pytest.approx(math.sqrt(2 / (4 * math.pi)))


def test_barrier_ratio_small_walk():
    r = normalized_barrier_check(Rademacher(), 10_000, 0.4, 20_000, seed=5)
    assert abs(r.ratio / r.target - 1) < 0.2


def test_barrier_needs_centered_law():
    with pytest.raises(ConfigurationError):
        normalized_barrier_check(Gaussian(1.0, 1.0), 100, 0.4, 10)


# ladder height tails


@pytest.mark.parametrize("law", [Constant(1.0), Rademacher()])
def test_lattice_ladder_height_is_one(law):
    t = ladder_height_tail_probe(law, 2000, seed=6, thresholds=(1, 2, 3))
    assert np.all(t.heights == 1.0)
    assert np.all(t.tail == 0.0)


def test_laplace_ladder_tail_decreasing_and_log_concave():
    t = ladder_height_tail_probe(Laplace(0.0, 1.0), 200_000, seed=7)
    assert t.tail[4] < t.tail[1]
    lt = t.log_tail()
    assert np.all(np.diff(lt) < 0)
    # concavity up to 5 standard errors of the second difference
    sd = np.sqrt((1 - t.tail) / (t.n_used * t.tail))
    noise = np.sqrt(sd[:-2] ** 2 + 4 * sd[1:-1] ** 2 + sd[2:] ** 2)
    assert np.all(np.diff(lt, 2) <= 5 * noise)
