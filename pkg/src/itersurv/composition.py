"""Iterated processes: an outer process read off along the range of an inner path.

``Z = X o |Y|`` (one-sided) queries the outer at ``|Y_t|``; ``Z = X o Y``
(two-sided) sends nonnegative inner values to the branch ``X+`` and
negative ones to an independent branch ``X-``.

Conventions shared with the compiled core:

* the outer value at time 0 is 0 and counts towards the maximum, so the
  maximum of a composed path is never below 0;
* outer draws are indexed by the rank of a positive query among the
  distinct positive queries, so repeated queries share one value;
* values are scanned in increasing query order, branch ``+`` first, and a
  scan stops at the first value above ``stop_above`` (that value is kept).
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .generators import (
    MAX_CHOLESKY_POINTS,
    counterexample_at,
    gen_counterexample_values,
    levy_cells,
    rw_increments,
    sample_fgn,
    spike_count,
)
from .processes import (
    ConfigurationError,
    CounterexampleSpec,
    FbmSpec,
    LevySpec,
    PathSkeleton,
    RandomWalkSpec,
    TwoSidedSpec,
    is_continuous,
)
from .rng import Stream

DEFAULT_FILL_CAP = 1e-2


class CompositionMode(str, Enum):
    ONE_SIDED_ABS = "one-sided-abs"
    TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class ExactAtQueries:
    """Outer evaluated only at the inner grid values."""

    name = "exact"


@dataclass(frozen=True)
class DenseRange:
    """Outer evaluated over the whole range of a continuous inner path.

    ``fill_step=None`` uses ``min(inner_step**1.5, 0.01 * range)``.
    """

    fill_step: float | None = None
    name = "dense"

    def __post_init__(self):
        if self.fill_step is not None and not self.fill_step > 0:
            raise ConfigurationError(f"fill_step must be positive, got {self.fill_step}")


RangeStrategy = Union[ExactAtQueries, DenseRange]


@dataclass(frozen=True)
class CompositionSpec:
    outer: object
    inner: object
    mode: CompositionMode = CompositionMode.ONE_SIDED_ABS
    strategy: object | None = None
    barrier: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", CompositionMode(self.mode))
        if self.strategy is None:
            object.__setattr__(self, "strategy", default_strategy(self.inner))
        if isinstance(self.strategy, DenseRange) and not is_continuous(self.inner):
            raise ConfigurationError(
                "DenseRange needs a continuous inner process; the event for a "
                "discrete inner is over its query set only"
            )


def default_strategy(inner) -> ExactAtQueries | DenseRange:
    return DenseRange() if is_continuous(inner) else ExactAtQueries()


@dataclass
class QuerySet:
    """Sorted distinct query times with a map back to the inner grid.

    ``backmap[k - 1]`` is the index into ``values`` of inner grid point ``k``
    (``k >= 1``), or ``-1`` when that point belongs to the other branch.
    """

    values: np.ndarray
    backmap: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def positive(self) -> np.ndarray:
        return self.values[self.values > 0]


def _query_set(raw: np.ndarray, mask: np.ndarray) -> QuerySet:
    values, inv = np.unique(raw[mask], return_inverse=True)
    backmap = np.full(len(raw), -1, dtype=np.int64)
    backmap[mask] = inv
    return QuerySet(values, backmap)


def build_queries(inner: PathSkeleton, mode: CompositionMode) -> tuple[QuerySet, QuerySet]:
    """Split the inner values ``values[1:]`` into plus and minus query sets."""
    mode = CompositionMode(mode)
    v = np.asarray(inner.values, dtype=float)[1:]
    if mode is CompositionMode.ONE_SIDED_ABS:
        a = np.abs(v)
        return _query_set(a, np.ones(len(a), bool)), _query_set(a, np.zeros(len(a), bool))
    return _query_set(v, v >= 0), _query_set(-v, v < 0)


def _positive_times(queries) -> tuple[np.ndarray, np.ndarray]:
    q = queries.values if isinstance(queries, QuerySet) else np.asarray(queries, dtype=float)
    if len(q) and (np.any(np.diff(q) <= 0) or q[0] < 0):
        raise ValueError("queries must be sorted, distinct and nonnegative")
    return q, q > 0


def evaluate_levy_at(queries, spec: LevySpec, stream: Stream) -> np.ndarray:
    """Exact joint sample of a Levy process at sorted distinct times (``X(0) = 0``)."""
    q, pos = _positive_times(queries)
    out = np.zeros(len(q))
    tp = q[pos]
    if len(tp):
        ends, _ = levy_cells(spec, np.diff(np.concatenate([[0.0], tp])), stream)
        out[pos] = ends
    return out


def evaluate_rw_at(queries, spec: RandomWalkSpec, stream: Stream) -> np.ndarray:
    """Random walk in real time, ``S_t = S_floor(t)``."""
    q, _ = _positive_times(queries)
    if not len(q):
        return np.zeros(0)
    idx = np.floor(q).astype(np.int64)
    n = int(idx.max())
    s = np.concatenate([[0.0], np.cumsum(rw_increments(spec.law, stream, n))]) if n else np.zeros(1)
    return s[idx]


def evaluate_counterexample_at(queries, stream: Stream) -> np.ndarray:
    q, _ = _positive_times(queries)
    return counterexample_at(q, stream)


def fbm_covariance(hurst: float) -> Callable[[float, float], float]:
    h2 = 2.0 * hurst

    def cov(s, t):
        return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)

    cov.__name__ = f"fbm_covariance(H={hurst:g})"
    return cov


def evaluate_gaussian_at(queries, covariance, stream: Stream, start: int = 0) -> np.ndarray:
    """Exact joint draw of a centered Gaussian process at the given (signed) points.

    ``covariance`` must accept numpy arrays.  Points with zero variance are
    pinned to 0; the rest use a dense Cholesky factor and normals
    ``start, start+1, ...`` of ``stream``.
    """
    t = np.asarray(queries.values if isinstance(queries, QuerySet) else queries, dtype=float)
    if len(t) == 0:
        return np.zeros(0)
    if len(t) > MAX_CHOLESKY_POINTS:
        raise ConfigurationError(
            f"{len(t)} Gaussian query points exceed the dense limit of {MAX_CHOLESKY_POINTS}; "
            "thin the inner grid"
        )
    cov = covariance(t[:, None], t[None, :])
    live = np.diag(cov) > 0
    out = np.zeros(len(t))
    if live.any():
        c = cov[np.ix_(live, live)]
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            name = getattr(covariance, "__name__", repr(covariance))
            raise ConfigurationError(
                f"covariance {name} is not positive definite on the {int(live.sum())} query points"
            ) from None
        out[live] = chol @ stream.normals(start, int(live.sum()))
    return out


# ---------------------------------------------------------------------------
# dense evaluation over an interval [0, reach]


def fill_step_for(strategy: DenseRange, inner_step: float, reach: float) -> float:
    if strategy.fill_step is not None:
        return float(strategy.fill_step)
    return min(inner_step**1.5, DEFAULT_FILL_CAP * reach)


def dense_cells(reach: float, step: float) -> np.ndarray:
    """Widths of the cells covering ``[0, reach]``: ``step`` each, the last one cut."""
    if not reach > 0:
        return np.zeros(0)
    m = max(1, int(math.ceil(reach / step)))
    widths = np.full(m, step)
    widths[-1] = reach - (m - 1) * step
    return widths


def _fbm_grid_count(reach: float, step: float) -> int:
    return int(math.floor(reach / step)) if reach > 0 else 0


def fbm_dense_values(hurst: float, reach_plus: float, reach_minus: float, step: float,
                     stream: Stream) -> tuple[np.ndarray, np.ndarray]:
    """fBm on the grid ``k*step`` inside ``[-reach_minus, reach_plus]``.

    One stationary noise sequence covers both sides (the branches are
    dependent), padded to a power-of-two length so embeddings are shared.
    Returns values at ``step, 2 step, ...`` and at ``-step, -2 step, ...``.
    """
    kp = _fbm_grid_count(reach_plus, step)
    km = _fbm_grid_count(reach_minus, step)
    n = kp + km
    if n == 0:
        return np.zeros(0), np.zeros(0)
    size = 1 << max(0, (n - 1).bit_length())
    noise, _ = sample_fgn(hurst, size, step, stream)
    s = np.concatenate([[0.0], np.cumsum(noise[:n])])
    plus = s[km + 1 :] - s[km]
    minus = s[km - 1 :: -1] - s[km] if km else np.zeros(0)
    return plus, minus


def _dense_branch(spec, reach: float, step: float, stream: Stream, bridge: bool) -> np.ndarray:
    if isinstance(spec, LevySpec):
        ends, sups = levy_cells(spec, dense_cells(reach, step), stream, bridge=bridge)
        return sups if bridge else ends
    if isinstance(spec, RandomWalkSpec):
        n = int(math.floor(reach)) if reach > 0 else 0
        return np.cumsum(rw_increments(spec.law, stream, n)) if n else np.zeros(0)
    if isinstance(spec, CounterexampleSpec):
        m = spike_count(reach) if reach > 0 else 0
        return gen_counterexample_values(m, stream) if m else np.zeros(0)
    if isinstance(spec, FbmSpec):
        return fbm_dense_values(spec.hurst, reach, 0.0, step, stream)[0]
    raise ConfigurationError(f"unsupported outer process {spec!r}")


def _branch_at(spec, queries: QuerySet, stream: Stream) -> np.ndarray:
    if isinstance(spec, LevySpec):
        return evaluate_levy_at(queries, spec, stream)
    if isinstance(spec, RandomWalkSpec):
        return evaluate_rw_at(queries, spec, stream)
    if isinstance(spec, CounterexampleSpec):
        return evaluate_counterexample_at(queries, stream)
    if isinstance(spec, FbmSpec):
        return evaluate_gaussian_at(queries, fbm_covariance(spec.hurst), stream)
    raise ConfigurationError(f"unsupported outer process {spec!r}")


def prefix_sup(values: np.ndarray, stop_above: float) -> tuple[float, bool]:
    """Maximum of ``0`` and ``values`` up to and including the first one above ``stop_above``."""
    values = np.asarray(values, dtype=float)
    if not len(values):
        return 0.0, False
    over = np.flatnonzero(values > stop_above)
    if len(over):
        return max(0.0, float(values[: over[0] + 1].max())), True
    return max(0.0, float(values.max())), False


def _branches(outer, mode: CompositionMode):
    if isinstance(outer, TwoSidedSpec):
        return outer.plus, outer.minus
    return outer, outer


def inner_is_continuous(inner: PathSkeleton) -> bool:
    return bool(inner.meta.get("continuous", False))


def compose_survival_indicator(outer, inner: PathSkeleton, barrier: float,
                               mode: CompositionMode = CompositionMode.ONE_SIDED_ABS,
                               strategy=None, streams=(None, None),
                               stop_above: float | None = None,
                               bridge=None) -> tuple[bool, float]:
    """Whether the composed path stays at or below ``barrier``; also its maximum.

    ``streams`` is ``(plus, minus)``: the outer branch streams (channels 1
    and 2).  A two-sided fBm outer uses the plus stream for both sides.
    The maximum covers the scanned prefix (see module notes); with
    ``stop_above=inf`` it is the maximum over the whole composed path.
    ``bridge`` (a flag or a ``(plus, minus)`` pair, ``None`` for automatic)
    selects exact bridge maxima for pure-diffusion Levy outers on dense
    ranges.
    """
    mode = CompositionMode(mode)
    if strategy is None:
        strategy = DenseRange() if inner_is_continuous(inner) else ExactAtQueries()
    stop = barrier if stop_above is None else stop_above
    plus_stream, minus_stream = streams
    bridge_p, bridge_m = bridge if isinstance(bridge, tuple) else (bridge, bridge)
    two = mode is CompositionMode.TWO_SIDED
    if two and isinstance(outer, FbmSpec) and not outer.two_sided:
        raise ConfigurationError(
            "two-sided mode with a one-sided fBm; use a two-sided fBm or TwoSidedSpec branches"
        )

    if isinstance(strategy, DenseRange):
        if not inner_is_continuous(inner):
            raise ConfigurationError("DenseRange with a discrete inner path")
        v = inner.values
        if two:
            reach_p, reach_m = float(v.max()), float(-v.min())
        else:
            reach_p, reach_m = float(np.abs(v).max()), 0.0
        if isinstance(outer, FbmSpec):
            step = fill_step_for(strategy, inner.grid.step, max(reach_p, reach_m))
            vp, vm = fbm_dense_values(outer.hurst, reach_p, reach_m if two else 0.0, step, plus_stream)
            mx, hit = prefix_sup(vp, stop)
            if two and not hit:
                mx2, hit = prefix_sup(vm, stop)
                mx = max(mx, mx2)
            return mx <= barrier, mx
        plus, minus = _branches(outer, mode)
        mx, hit = prefix_sup(
            _dense_branch(plus, reach_p, fill_step_for(strategy, inner.grid.step, reach_p),
                          plus_stream, _bridge_for(plus, bridge_p)), stop)
        if two and not hit and reach_m > 0:
            mx2, hit = prefix_sup(
                _dense_branch(minus, reach_m, fill_step_for(strategy, inner.grid.step, reach_m),
                              minus_stream, _bridge_for(minus, bridge_m)), stop)
            mx = max(mx, mx2)
        return mx <= barrier, mx

    qp, qm = build_queries(inner, mode)
    if isinstance(outer, FbmSpec):
        pts = np.concatenate([qp.values, -qm.values[::-1]]) if two else qp.values
        order = np.argsort(pts, kind="stable")
        vals = np.empty(len(pts))
        vals[order] = evaluate_gaussian_at(pts[order], fbm_covariance(outer.hurst), plus_stream)
        mx, hit = prefix_sup(vals[: len(qp)], stop)
        if two and not hit:
            mx2, hit = prefix_sup(vals[len(qp):][::-1], stop)
            mx = max(mx, mx2)
        return mx <= barrier, mx
    plus, minus = _branches(outer, mode)
    mx, hit = prefix_sup(_branch_at(plus, qp, plus_stream), stop)
    if two and not hit and len(qm):
        mx2, hit = prefix_sup(_branch_at(minus, qm, minus_stream), stop)
        mx = max(mx, mx2)
    return mx <= barrier, mx


def _bridge_for(spec, bridge: bool | None) -> bool:
    if not isinstance(spec, LevySpec):
        return False
    if bridge is None:
        return spec.jump_rate == 0.0 and spec.diffusion > 0
    return bool(bridge)
