"""Sample paths, exact at grid points, for every supported process family.

Draw layout per family (indices into the path's stream):

* random walk: increment ``k`` (0-based) uses draws ``[k*d, (k+1)*d)`` for a
  law consuming ``d`` draws; Rademacher increments are bit-packed, step ``k``
  is bit ``63 - k % 64`` of draw ``k // 64``.
* Levy cells: cell ``k`` owns draws ``4k`` (diffusion normal), ``4k+1``
  (Poisson count), ``4k+2`` (bridge maximum); jump ``j`` of the path uses
  draws from ``4*M + j*d`` on.
* integrated Brownian motion of order n: step ``s`` uses ``n+1`` normals at
  ``[s*(n+1), (s+1)*(n+1))``.
* fBm: ``2L`` real and ``2L`` imaginary normals for an embedding of size ``2L``.
* counterexample: spike ``n`` (1-based) uses draw ``n-1``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .processes import (
    CONSTANT,
    GAUSSIAN,
    LAPLACE,
    RADEMACHER,
    SIGNED_WEIBULL,
    ConfigurationError,
    CounterexampleSpec,
    FbmSpec,
    IbmSpec,
    LevySpec,
    PathSkeleton,
    RandomWalkSpec,
    TimeGrid,
    is_continuous,
)
from .rng import Stream, to_open_uniform, to_uniform

MAX_CHOLESKY_POINTS = 4096
MAX_POISSON_MEAN = 1e6
JUMP_OFFSET = 1 << 62
_EMBED_TOL = 1e-8


# ---------------------------------------------------------------------------
# increment laws


def law_from_raw(law, raw: np.ndarray) -> np.ndarray:
    """Map raw draws, ``law.draws`` per variate (row-major), to variates."""
    code = law.code
    if code == CONSTANT:
        n = 0 if raw.ndim == 1 else raw.shape[0]
        return np.full(n, law.value)
    a, b, c = law.params()
    if code == RADEMACHER:
        return np.where(raw >> np.uint64(63), 1.0, -1.0)
    if code == GAUSSIAN:
        from scipy.special import ndtri

        return a + b * ndtri(to_open_uniform(raw))
    if code == LAPLACE:
        u = to_open_uniform(raw)
        return np.where(u < 0.5, a + b * np.log(2.0 * u), a - b * np.log(2.0 - 2.0 * u))
    if code == SIGNED_WEIBULL:
        raw = raw.reshape(-1, 2)
        sign = np.where(raw[:, 0] >> np.uint64(63), 1.0, -1.0)
        mag = b * (-np.log(to_open_uniform(raw[:, 1]))) ** (1.0 / a)
        return c + sign * mag
    raise ConfigurationError(f"unknown law {law!r}")


def sample_law(law, stream: Stream, start: int, n: int) -> np.ndarray:
    if law.draws == 0:
        return np.full(n, law.value)
    return law_from_raw(law, stream.raw(start, n * law.draws))


def rw_increments(law, stream: Stream, n: int) -> np.ndarray:
    if law.code == RADEMACHER:
        words = stream.raw(0, (n + 63) // 64)
        bits = np.unpackbits(words.astype(">u8").view(np.uint8))[:n]
        return bits.astype(float) * 2.0 - 1.0
    return sample_law(law, stream, 0, n)


# ---------------------------------------------------------------------------
# random walks


def gen_random_walk(n_steps: int, law, stream: Stream) -> PathSkeleton:
    if int(n_steps) != n_steps or n_steps < 1:
        raise ConfigurationError(f"n_steps must be a positive integer, got {n_steps}")
    inc = rw_increments(law, stream, int(n_steps))
    return PathSkeleton(TimeGrid(1.0, int(n_steps)), np.concatenate([[0.0], np.cumsum(inc)]))


# ---------------------------------------------------------------------------
# Levy processes


def poisson_inverse(mean: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Poisson(mean) variates by CDF inversion of ``u`` (one uniform each)."""
    mean = np.asarray(mean, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(mean > MAX_POISSON_MEAN):
        raise ConfigurationError(f"Poisson mean above {MAX_POISSON_MEAN:g} in one cell")
    k = np.maximum(0.0, np.floor(mean - 12.0 * np.sqrt(mean) - 10.0))
    with np.errstate(divide="ignore"):
        logm = np.where(mean > 0, np.log(np.where(mean > 0, mean, 1.0)), 0.0)
    p = np.exp(k * logm - mean - gammaln(k + 1.0))
    cdf = p.copy()
    limit = mean + 20.0 * np.sqrt(mean) + 50.0
    active = (mean > 0) & (u >= cdf)
    while active.any():
        idx = np.nonzero(active)[0]
        k[idx] += 1.0
        p[idx] = p[idx] * mean[idx] / k[idx]
        cdf[idx] += p[idx]
        active[idx] = (u[idx] >= cdf[idx]) & (k[idx] < limit[idx])
    return np.where(mean > 0, k, 0.0).astype(np.int64)


def levy_cells(spec: LevySpec, widths: np.ndarray, stream: Stream, bridge: bool = False,
               start_value: float = 0.0):
    """Evaluate a Levy process across consecutive cells of the given widths.

    Returns ``(ends, sups)``: the value at each cell's right end, and the
    supremum over each cell (``None`` unless ``bridge``).  Jumps in a cell are
    applied at its right end; with ``bridge`` the diffusion part inside a
    cell contributes its exact Brownian-bridge maximum.
    """
    widths = np.asarray(widths, dtype=float)
    m = len(widths)
    if m == 0:
        return np.empty(0), (np.empty(0) if bridge else None)
    raw = stream.raw(0, 4 * m).reshape(m, 4)
    inc = np.zeros(m)
    if spec.diffusion > 0:
        from scipy.special import ndtri

        z = ndtri(to_open_uniform(raw[:, 0]))
        inc = spec.drift * widths + (spec.diffusion * np.sqrt(widths)) * z
    elif spec.drift != 0.0:
        inc = spec.drift * widths
    jsum = np.zeros(m)
    if spec.jump_rate > 0:
        counts = poisson_inverse(spec.jump_rate * widths, to_uniform(raw[:, 1]))
        total = int(counts.sum())
        if total:
            jumps = sample_law(spec.jump_law, stream, JUMP_OFFSET, total)
            first = np.concatenate([[0], np.cumsum(counts)[:-1]])
            for r in range(int(counts.max())):
                has = counts > r
                jsum[has] += jumps[first[has] + r]
    ends = np.cumsum(inc + jsum) + start_value
    if not bridge:
        return ends, None
    pre_start = np.concatenate([[start_value], ends[:-1]])
    pre_end = pre_start + inc
    if spec.diffusion > 0:
        u = to_open_uniform(raw[:, 2])
        d = pre_end - pre_start
        top = 0.5 * (pre_start + pre_end + np.sqrt(d * d - 2.0 * spec.diffusion**2 * widths * np.log(u)))
    else:
        top = np.maximum(pre_start, pre_end)
    return ends, np.maximum(top, ends)


def gen_levy_path(grid: TimeGrid, spec: LevySpec, stream: Stream, bridge: bool = False) -> PathSkeleton:
    widths = np.full(grid.count, grid.step)
    ends, sups = levy_cells(spec, widths, stream, bridge=bridge)
    path = PathSkeleton(grid, np.concatenate([[0.0], ends]))
    if bridge:
        path.meta["cell_sup"] = sups
    return path


# ---------------------------------------------------------------------------
# integrated Brownian motion


@lru_cache(maxsize=64)
def ibm_step_matrices(order: int, h: float):
    """Transition matrix and Cholesky factor of the one-step noise covariance.

    State is ``(W, Y1, ..., Y_order)``; entries are ``h^(k-j)/(k-j)!`` and
    ``h^(j+k+1) / (j! k! (j+k+1))``.
    """
    n = order + 1
    trans = np.zeros((n, n))
    for k in range(n):
        for j in range(k + 1):
            trans[k, j] = h ** (k - j) / math.factorial(k - j)
    chol = np.linalg.cholesky(ibm_step_covariance(order, 1.0))
    scale = np.array([h ** (j + 0.5) for j in range(n)])
    chol = scale[:, None] * chol
    trans.setflags(write=False)
    chol.setflags(write=False)
    return trans, chol


def ibm_step_covariance(order: int, h: float) -> np.ndarray:
    n = order + 1
    cov = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            cov[j, k] = h ** (j + k + 1) / (math.factorial(j) * math.factorial(k) * (j + k + 1))
    return cov


def gen_ibm_path(grid: TimeGrid, spec: IbmSpec, stream: Stream) -> PathSkeleton:
    n = spec.order + 1
    m = grid.count
    z = stream.normals(0, m * n).reshape(m, n)
    if spec.order == 0:
        values = np.concatenate([[0.0], np.cumsum(math.sqrt(grid.step) * z[:, 0])])
        return PathSkeleton(grid, values)
    trans, chol = ibm_step_matrices(spec.order, grid.step)
    noise = z @ chol.T
    state = np.zeros(n)
    values = np.empty(m + 1)
    values[0] = 0.0
    for s in range(m):
        state = trans @ state + noise[s]
        values[s + 1] = state[-1]
    return PathSkeleton(grid, values)


# ---------------------------------------------------------------------------
# fractional Brownian motion


def fgn_autocovariance(hurst: float, n: int, step: float = 1.0) -> np.ndarray:
    k = np.arange(n, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * step**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=32)
def _fgn_embedding(hurst: float, n: int, step: float):
    """``sqrt(eigenvalues / (2n))`` of the circulant embedding, or ``None``."""
    gamma = fgn_autocovariance(hurst, n + 1, step)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -_EMBED_TOL * lam.max():
        return None
    out = np.sqrt(np.clip(lam, 0.0, None) / len(row))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _fgn_cholesky(hurst: float, n: int, step: float):
    from scipy.linalg import toeplitz

    chol = np.linalg.cholesky(toeplitz(fgn_autocovariance(hurst, n, step)))
    chol.setflags(write=False)
    return chol


def sample_fgn(hurst: float, n: int, step: float, stream: Stream, start: int = 0):
    """``n`` fractional Gaussian noise increments; returns ``(noise, method)``."""
    sq = _fgn_embedding(hurst, n, step)
    if sq is not None:
        size = len(sq)
        z = stream.normals(start, 2 * size)
        w = np.fft.fft(sq * (z[:size] + 1j * z[size:]))
        return w.real[:n], "circulant"
    if n > MAX_CHOLESKY_POINTS:
        raise ConfigurationError(
            f"circulant embedding not nonnegative definite and {n} points exceed "
            f"the dense Cholesky limit of {MAX_CHOLESKY_POINTS}"
        )
    z = stream.normals(start, n)
    return _fgn_cholesky(hurst, n, step) @ z, "cholesky"


def gen_fbm_path(grid: TimeGrid, spec: FbmSpec, stream: Stream) -> PathSkeleton:
    m = grid.count
    if not spec.two_sided:
        noise, method = sample_fgn(spec.hurst, m, grid.step, stream)
        values = np.concatenate([[0.0], np.cumsum(noise)])
        return PathSkeleton(grid, values, meta={"method": method})
    noise, method = sample_fgn(spec.hurst, 2 * m, grid.step, stream)
    s = np.concatenate([[0.0], np.cumsum(noise)])
    values = s[m:] - s[m]
    minus = s[m::-1] - s[m]
    return PathSkeleton(grid, values, minus=minus, meta={"method": method})


# ---------------------------------------------------------------------------
# Brownian chains


def gen_chain_inner(spec, horizon: float, count: int, stream: Stream) -> PathSkeleton:
    """Outermost Brownian level of a chain, sampled over the range of the levels below.

    Level ``l`` (0 is the innermost) is a Brownian motion on ``[0, R_l]`` with
    ``count`` steps using normals ``[l*count, (l+1)*count)``; ``R_0 = horizon``
    and ``R_{l+1} = max |level l|``.  Only the range of the returned path is
    meaningful, so it is tagged ``range_only``.
    """
    reach = float(horizon)
    values = None
    for level in range(spec.depth):
        if level:
            reach = float(np.max(np.abs(values)))
        z = stream.normals(level * count, count)
        values = np.concatenate([[0.0], np.cumsum(math.sqrt(reach / count) * z)])
    grid = TimeGrid(reach / count if reach > 0 else 1.0, count)
    return PathSkeleton(grid, values, meta={"continuous": True, "range_only": True})


# ---------------------------------------------------------------------------
# counterexample


def gen_counterexample_values(m: int, stream: Stream) -> np.ndarray:
    """Spike values ``X~_1..X~_m`` (each 0 or 2, ``P(2) = 1/(n+1)``)."""
    if int(m) != m or m < 1:
        raise ConfigurationError(f"m must be a positive integer, got {m}")
    u = stream.uniforms(0, int(m))
    n = np.arange(1, int(m) + 1)
    return np.where(u < 1.0 / (n + 1), 2.0, 0.0)


def spike_count(horizon: float) -> int:
    """Number of spike times ``(2n-1)/2`` in ``[0, horizon]``."""
    return max(0, int(math.floor(horizon + 0.5)))


def counterexample_at(times: np.ndarray, stream: Stream) -> np.ndarray:
    """The counterexample process at the given nonnegative times."""
    times = np.asarray(times, dtype=float)
    doubled = 2.0 * times
    is_spike = (doubled == np.floor(doubled)) & (np.mod(doubled, 2.0) == 1.0)
    out = np.zeros(len(times))
    if is_spike.any():
        n = ((doubled[is_spike] + 1.0) / 2.0).astype(np.int64)
        u = to_uniform(np.array([stream.raw(int(i) - 1, 1)[0] for i in n], dtype=np.uint64))
        out[is_spike] = np.where(u < 1.0 / (n + 1), 2.0, 0.0)
    return out


# ---------------------------------------------------------------------------
# dispatch


def gen_path(spec, grid: TimeGrid, stream: Stream, minus_stream: Stream | None = None,
             bridge: bool = False) -> PathSkeleton:
    """Sample any supported process on ``grid`` (random walks use ``grid.count`` steps).

    The result's ``meta["continuous"]`` tells composition whether the range of
    the path is an interval.
    """
    path = _gen_path(spec, grid, stream, minus_stream, bridge)
    path.meta.setdefault("continuous", is_continuous(spec))
    return path


def _gen_path(spec, grid, stream, minus_stream, bridge):
    from .processes import ChainSpec, TwoSidedSpec

    if isinstance(spec, RandomWalkSpec):
        if grid.step != 1.0:
            raise ConfigurationError("random walks live on the unit grid")
        return gen_random_walk(grid.count, spec.law, stream)
    if isinstance(spec, LevySpec):
        return gen_levy_path(grid, spec, stream, bridge=bridge)
    if isinstance(spec, IbmSpec):
        return gen_ibm_path(grid, spec, stream)
    if isinstance(spec, FbmSpec):
        return gen_fbm_path(grid, spec, stream)
    if isinstance(spec, CounterexampleSpec):
        values = counterexample_at(grid.times(), stream)
        return PathSkeleton(grid, values)
    if isinstance(spec, TwoSidedSpec):
        if minus_stream is None:
            raise ConfigurationError("two-sided spec needs a stream for the minus branch")
        plus = gen_path(spec.plus, grid, stream, bridge=bridge)
        minus = gen_path(spec.minus, grid, minus_stream, bridge=bridge)
        return PathSkeleton(grid, plus.values, minus=minus.values)
    if isinstance(spec, ChainSpec):
        return gen_chain_inner(spec, grid.horizon, grid.count, stream)
    raise ConfigurationError(f"unsupported process spec {spec!r}")
