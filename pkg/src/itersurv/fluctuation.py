"""Running extrema, ladder epochs and Monte Carlo probes of path functionals.

The probes estimate small-deviation probabilities of ``sup_[0,1] |Y|``,
negative moments of that supremum, the normalized one-sided exit
probability of a centered walk and the tail of its first ladder height.
All of them draw the probed path from the inner channel of its sample's
streams.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import _backend
from .engine import encode_law, encode_process
from .estimation import DEFAULT_LEVEL, wilson_interval
from .generators import gen_fbm_path, ibm_step_matrices
from .processes import (
    ConfigurationError,
    FbmSpec,
    IbmSpec,
    LevySpec,
    PathSkeleton,
    TimeGrid,
)
from .rng import INNER, derive_stream

SMALLDEV_STEP = 2.0**-10
LADDER_CAP = 10**6
PROBE_BATCH = 1 << 15
HEAVY_TAIL_FRACTION = 1e-3
HEAVY_TAIL_SHARE = 0.5

# scenario ids keep the probes' streams apart from each other and from jobs
SCENARIO_SMALLDEV = 1001
SCENARIO_SUPABS = 1002
SCENARIO_BARRIER = 1003
SCENARIO_LADDER = 1004


def _values(path) -> np.ndarray:
    v = path.values if isinstance(path, PathSkeleton) else np.asarray(path, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise ValueError("a path needs at least one value after the anchor")
    return v


# ---------------------------------------------------------------------------
# running extrema and ladder epochs


@dataclass(frozen=True)
class RunningExtrema:
    """``maxima[n-1] = max_{1<=k<=n} S_k`` and ``minima[n-1] = min_{1<=k<=n} S_k``."""

    maxima: np.ndarray
    minima: np.ndarray


def running_extrema(path) -> RunningExtrema:
    """Running maximum and minimum over ``values[1:]`` (the anchor is excluded)."""
    v = _values(path)[1:]
    return RunningExtrema(np.maximum.accumulate(v), np.minimum.accumulate(v))


@dataclass(frozen=True)
class LadderDecomposition:
    direction: str
    epochs: np.ndarray
    heights: np.ndarray

    def __len__(self):
        return len(self.epochs)


def ladder_decomposition(path, direction: str = "ascending") -> LadderDecomposition:
    """Strict ladder epochs relative to the anchor and the record increments.

    Ascending epochs are the indices ``k >= 1`` with ``values[k] >
    max(0, values[1..k-1])``; descending ones are those of the negated path.
    """
    if direction not in ("ascending", "descending"):
        raise ValueError(f"direction must be 'ascending' or 'descending', got {direction!r}")
    v = _values(path)
    if direction == "descending":
        v = -v
    prev = np.maximum.accumulate(np.concatenate([[0.0], v[1:-1]]))
    prev = np.maximum(prev, 0.0)
    epochs = np.flatnonzero(v[1:] > prev) + 1
    records = v[epochs]
    heights = np.diff(np.concatenate([[0.0], records]))
    return LadderDecomposition(direction, epochs.astype(np.int64), heights)


# ---------------------------------------------------------------------------
# small deviations


@dataclass(frozen=True)
class ProbePoint:
    """Count-based estimate at one level of a probe."""

    level: float
    n_samples: int
    n_hits: int
    confidence: float = DEFAULT_LEVEL

    @property
    def p_hat(self) -> float:
        return self.n_hits / self.n_samples

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.n_hits, self.n_samples, self.confidence)

    def contains(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= value <= hi


def _unit_descriptor(spec, count: int):
    """Descriptor and IBM matrices for a path on ``[0, 1]`` with ``count`` cells."""
    proc = encode_process(spec)
    e0 = np.zeros(0)
    if isinstance(spec, IbmSpec) and spec.order > 0:
        trans, chol = ibm_step_matrices(spec.order, 1.0 / count)
        return proc, trans.ravel().copy(), chol.ravel().copy()
    return proc, e0, e0


def _unit_count(step: float) -> int:
    count = int(round(1.0 / step))
    if count < 1 or not math.isclose(count * step, 1.0, rel_tol=1e-12):
        raise ConfigurationError(f"step must divide 1, got {step}")
    return count


def _kernel_probe_ok(spec) -> bool:
    return isinstance(spec, (LevySpec, IbmSpec))


def _fbm_sup_abs(spec: FbmSpec, count: int, seed: int, scenario: int, start: int, stop: int):
    grid = TimeGrid(1.0 / count, count)
    out = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        s = derive_stream(seed, (scenario, 0, i, INNER))
        out[j] = np.abs(gen_fbm_path(grid, FbmSpec(spec.hurst), s).values).max()
    return out


def small_deviation_curve(spec, eps_list: Sequence[float], samples: int, seed: int = 0,
                          step: float = SMALLDEV_STEP, bridge: bool = True,
                          level: float = DEFAULT_LEVEL, backend=None,
                          nthreads: int | None = None) -> list[ProbePoint]:
    """Estimates of ``P(sup_[0,1] |Y| <= eps)`` for every ``eps`` in ``eps_list``.

    The path is built on a grid of ``step``.  For Brownian motion with
    ``bridge`` (default) the supremum between grid points is accounted for
    exactly: each cell is killed with the probability that the Brownian
    bridge between its endpoints leaves the band.  Other processes are
    monitored at grid points only.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or len(eps) == 0 or np.any(~(eps > 0)):
        raise ConfigurationError("eps_list must be a nonempty list of positive levels")
    samples = int(samples)
    if samples < 1:
        raise ConfigurationError(f"samples must be positive, got {samples}")
    count = _unit_count(step)
    order = np.argsort(eps, kind="stable")
    sorted_eps = np.ascontiguousarray(eps[order])
    hits = np.zeros(len(eps), dtype=np.int64)
    if _kernel_probe_ok(spec):
        be = _backend.get(backend)
        proc, trans, chol = _unit_descriptor(spec, count)
        use_bridge = int(bool(bridge) and isinstance(spec, LevySpec))
        for lo in range(0, samples, PROBE_BATCH):
            hi = min(lo + PROBE_BATCH, samples)
            flags = be.smalldev_batch(seed, SCENARIO_SMALLDEV, 0, proc, count, sorted_eps, trans,
                                      chol, use_bridge, lo, hi, nthreads=nthreads)
            hits += flags.sum(axis=0, dtype=np.int64)
    elif isinstance(spec, FbmSpec):
        for lo in range(0, samples, PROBE_BATCH):
            hi = min(lo + PROBE_BATCH, samples)
            sup = _fbm_sup_abs(spec, count, seed, SCENARIO_SMALLDEV, lo, hi)
            hits += (sup[:, None] <= sorted_eps[None, :]).sum(axis=0)
    else:
        raise ConfigurationError(f"small deviations not supported for {type(spec).__name__}")
    out = [None] * len(eps)
    for j, idx in enumerate(order):
        out[idx] = ProbePoint(float(eps[idx]), samples, int(hits[j]), level)
    return out


# ---------------------------------------------------------------------------
# negative moments


@dataclass(frozen=True)
class NegativeMoment:
    """Sample mean of ``(sup_[0,1] |Y|)^-eta`` with its standard error.

    ``heavy_tail`` is set when the largest 0.1% of the summands carry more
    than half of the total, a sign that the moment may be infinite.
    """

    eta: float
    mean: float
    stderr: float
    n_samples: int
    top_share: float
    heavy_tail: bool


def sup_abs_samples(spec, samples: int, seed: int = 0, step: float = SMALLDEV_STEP,
                    start: int = 0, backend=None, nthreads: int | None = None) -> np.ndarray:
    """Grid values of ``sup_[0,1] |Y|`` for samples ``start .. start+samples-1``."""
    count = _unit_count(step)
    stop = start + int(samples)
    if isinstance(spec, FbmSpec):
        return _fbm_sup_abs(spec, count, seed, SCENARIO_SUPABS, start, stop)
    if not _kernel_probe_ok(spec):
        raise ConfigurationError(f"supremum probe not supported for {type(spec).__name__}")
    be = _backend.get(backend)
    proc, trans, chol = _unit_descriptor(spec, count)
    parts = []
    for lo in range(start, stop, PROBE_BATCH):
        hi = min(lo + PROBE_BATCH, stop)
        parts.append(be.supabs_batch(seed, SCENARIO_SUPABS, 0, proc, count, trans, chol, lo, hi,
                                     nthreads=nthreads))
    return np.concatenate(parts) if parts else np.zeros(0)


def negative_moment_estimate(spec, eta: float, samples: int, seed: int = 0,
                             step: float = SMALLDEV_STEP, backend=None,
                             nthreads: int | None = None, start: int = 0) -> NegativeMoment:
    """Monte Carlo ``E[(sup_[0,1] |Y|)^-eta]``; an error if the supremum can vanish."""
    if not eta >= 0:
        raise ConfigurationError(f"eta must be nonnegative, got {eta}")
    samples = int(samples)
    if samples < 1:
        raise ConfigurationError(f"samples must be positive, got {samples}")
    z = sup_abs_samples(spec, samples, seed, step, start, backend, nthreads)
    zeros = int(np.count_nonzero(z == 0.0))
    if zeros:
        raise ConfigurationError(
            f"sup |Y| = 0 in {zeros} of {samples} samples: P(sup = 0) > 0 and the "
            "negative moment is undefined"
        )
    x = z ** (-float(eta))
    # a constant summand is returned as is, free of summation rounding
    mean = float(x[0]) if np.all(x == x[0]) else float(x.mean())
    stderr = float(x.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    top = max(1, int(math.ceil(HEAVY_TAIL_FRACTION * samples)))
    share = float(np.partition(x, samples - top)[samples - top:].sum() / x.sum())
    return NegativeMoment(float(eta), mean, stderr, samples, share,
                          share > HEAVY_TAIL_SHARE and samples > 1)


# ---------------------------------------------------------------------------
# random-walk probes


@dataclass(frozen=True)
class BarrierRatio:
    """``P(M_N <= N^a) * sqrt(N) / N^a`` with its interval and the limit constant."""

    n_steps: int
    exponent: float
    estimate: ProbePoint
    target: float

    @property
    def scale(self) -> float:
        return math.sqrt(self.n_steps) / self.n_steps**self.exponent

    @property
    def ratio(self) -> float:
        return self.estimate.p_hat * self.scale

    @property
    def interval(self) -> tuple[float, float]:
        lo, hi = self.estimate.interval
        return lo * self.scale, hi * self.scale

    @property
    def relative_error(self) -> float:
        return abs(self.ratio / self.target - 1.0)


def barrier_target(law) -> float:
    """Limit ``sqrt(2 / (pi E[Y^2]))`` of the normalized exit probability."""
    return math.sqrt(2.0 / (math.pi * (law.variance + law.mean**2)))


def normalized_barrier_check(law, n_steps: int, exponent: float, samples: int, seed: int = 0,
                             level: float = DEFAULT_LEVEL, backend=None,
                             nthreads: int | None = None) -> BarrierRatio:
    """Estimate ``P(max_{1<=k<=N} S_k <= N^a)`` and normalize by ``N^a / sqrt(N)``."""
    if law.mean != 0.0:
        raise ConfigurationError(f"the barrier check needs a centered law, mean is {law.mean}")
    if not law.variance > 0:
        raise ConfigurationError("the barrier check needs a law with positive variance")
    if not 0.0 < exponent < 0.5:
        raise ConfigurationError(f"exponent must be in (0, 1/2), got {exponent}")
    n_steps, samples = int(n_steps), int(samples)
    if n_steps < 1 or samples < 1:
        raise ConfigurationError("n_steps and samples must be positive")
    be = _backend.get(backend)
    desc = np.array(encode_law(law))
    barrier = float(n_steps) ** exponent
    hits = 0
    for lo in range(0, samples, PROBE_BATCH):
        hi = min(lo + PROBE_BATCH, samples)
        hits += int(be.rw_max_batch(seed, SCENARIO_BARRIER, 0, desc, n_steps, barrier, lo, hi,
                                    nthreads=nthreads).sum())
    return BarrierRatio(n_steps, float(exponent), ProbePoint(barrier, samples, hits, level),
                        barrier_target(law))


@dataclass(frozen=True)
class LadderTail:
    """Empirical ``P(H_1 > x)`` over the samples that reached a ladder epoch."""

    thresholds: np.ndarray
    tail: np.ndarray
    n_used: int
    n_flagged: int
    heights: np.ndarray

    def log_tail(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.tail)


def ladder_height_tail_probe(law, samples: int, seed: int = 0,
                             thresholds: Sequence[float] = (1, 2, 3, 4, 5),
                             cap: int = LADDER_CAP, backend=None,
                             nthreads: int | None = None) -> LadderTail:
    """Tail of the first strict ascending ladder height of the walk with ``law``.

    Samples without a ladder epoch within ``cap`` steps are excluded and
    counted in ``n_flagged``.
    """
    if law.mean < 0:
        raise ConfigurationError(f"ladder heights need E[Y] >= 0, mean is {law.mean}")
    samples = int(samples)
    if samples < 1:
        raise ConfigurationError(f"samples must be positive, got {samples}")
    be = _backend.get(backend)
    desc = np.array(encode_law(law))
    parts = []
    for lo in range(0, samples, PROBE_BATCH):
        hi = min(lo + PROBE_BATCH, samples)
        parts.append(be.ladder_batch(seed, SCENARIO_LADDER, 0, desc, int(cap), lo, hi,
                                     nthreads=nthreads))
    h = np.concatenate(parts)
    ok = ~np.isnan(h)
    used = h[ok]
    th = np.asarray(thresholds, dtype=float)
    n_used = int(ok.sum())
    tail = (used[None, :] > th[:, None]).sum(axis=1) / max(n_used, 1)
    return LadderTail(th, tail, n_used, int((~ok).sum()), used)
