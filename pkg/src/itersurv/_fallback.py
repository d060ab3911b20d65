"""Pure numpy twins of the kernels in :mod:`itersurv._core`.

Same signatures and the same draw layout, built from the op-level
generators and composition code.  Results agree with the compiled kernels
up to floating-point rounding (the inverse normal CDF and summation order
differ in the last bits).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri as _ndtri

from . import rng
from .composition import CompositionMode, DenseRange, ExactAtQueries
from .generators import gen_ibm_path, levy_cells, rw_increments, sample_law
from .processes import (
    CONSTANT,
    GAUSSIAN,
    LAPLACE,
    RADEMACHER,
    SIGNED_WEIBULL,
    ChainSpec,
    ConfigurationError,
    Constant,
    CounterexampleSpec,
    Gaussian,
    IbmSpec,
    Laplace,
    LevySpec,
    Rademacher,
    RandomWalkSpec,
    SignedWeibull,
    TimeGrid,
    TwoSidedSpec,
)

NAME = "python"
NEGLIGIBLE = 46.0


def decode_law(d) -> object:
    code, a, b, c = int(d[0]), float(d[1]), float(d[2]), float(d[3])
    if code == RADEMACHER:
        return Rademacher()
    if code == GAUSSIAN:
        return Gaussian(a, b)
    if code == LAPLACE:
        return Laplace(a, b)
    if code == SIGNED_WEIBULL:
        return SignedWeibull(a, b, c)
    if code == CONSTANT:
        return Constant(a)
    raise ConfigurationError(f"unknown law code {code}")


def decode_process(d):
    """Process spec and bridge flag from a descriptor row."""
    from .engine import (
        K_CEX,
        K_CHAIN,
        K_IBM,
        K_LEVY,
        K_RW,
        P_BRIDGE,
        P_KIND,
        P_LAM,
        P_LAW,
        P_MU,
        P_ORDER,
        P_SIGMA,
    )

    kind = int(d[P_KIND])
    law = decode_law(d[P_LAW:P_LAW + 4])
    if kind == K_RW:
        return RandomWalkSpec(law), False
    if kind == K_LEVY:
        spec = LevySpec(drift=float(d[P_MU]), diffusion=float(d[P_SIGMA]),
                        jump_rate=float(d[P_LAM]), jump_law=law)
        return spec, bool(d[P_BRIDGE])
    if kind == K_IBM:
        return IbmSpec(int(d[P_ORDER])), False
    if kind == K_CEX:
        return CounterexampleSpec(), False
    if kind == K_CHAIN:
        return ChainSpec(int(d[P_ORDER])), False
    raise ConfigurationError(f"unknown process kind {kind}")


def _job_from(seed, scenario, grid_index, job, plus, minus, inner):
    from . import engine as E

    p, bp = decode_process(plus)
    m, bm = decode_process(minus)
    two = bool(job[E.J_TWO])
    kw = dict(barrier=float(job[E.J_BARRIER]), stop_above=float(job[E.J_STOP]), seed=int(seed),
              scenario=int(scenario), grid_index=int(grid_index))
    if job[E.J_COMPOSE]:
        q, _ = decode_process(inner)
        strat = DenseRange(float(job[E.J_FILL]) or None) if job[E.J_DENSE] else ExactAtQueries()
        outer = TwoSidedSpec(p, m) if two else p
        mode = CompositionMode.TWO_SIDED if two else CompositionMode.ONE_SIDED_ABS
        count = int(job[E.J_INNER_COUNT])
        sj = E.SurvivalJob(outer, float(job[E.J_HORIZON]), inner=q, mode=mode, strategy=strat,
                           inner_steps=None if isinstance(q, RandomWalkSpec) else count, **kw)
    else:
        outer = TwoSidedSpec(p, m) if two else p
        step = float(job[E.J_BASE_STEP]) or E.DEFAULT_STEP
        sj = E.SurvivalJob(outer, float(job[E.J_HORIZON]), step=step, **kw)
    if sj.bridges() != (bp, bm):
        if bp != bm:
            raise ConfigurationError("per-branch bridge flags differ from the job defaults")
        sj = E.replace(sj, bridge=bp)
    return sj


def survival_batch(seed, scenario, grid_index, job, plus, minus, inner, ibm_trans, ibm_chol,
                   start, stop, nthreads=None):
    """``(survived, max_value)`` per sample; see :func:`itersurv._core.survival_batch`."""
    from .engine import per_sample

    sj = _job_from(seed, scenario, grid_index, job, plus, minus, inner)
    s, m = per_sample(sj, int(start), int(stop))
    return s.astype(np.uint8), m


def inner_extrema_batch(seed, scenario, grid_index, job, inner, ibm_trans, ibm_chol, start,
                        stop, nthreads=None):
    """``(max, min)`` of the inner path per sample, origin included."""
    from . import engine as E

    q, _ = decode_process(inner)
    count = int(job[E.J_INNER_COUNT])
    sj = E.SurvivalJob(LevySpec(), float(job[E.J_HORIZON]), inner=q,
                       strategy=DenseRange(),
                       inner_steps=None if isinstance(q, RandomWalkSpec) else count,
                       seed=int(seed), scenario=int(scenario), grid_index=int(grid_index))
    n = max(0, int(stop) - int(start))
    hi, lo = np.zeros(n), np.zeros(n)
    for j in range(n):
        s = rng.derive_stream(sj.seed, (sj.scenario, sj.grid_index, int(start) + j, rng.INNER))
        v = E.inner_path(sj, s).values
        hi[j] = max(0.0, v.max())
        lo[j] = min(0.0, v.min())
    return hi, lo


def raw_draws(k0, k1, start, n):
    return rng.Stream((int(k0), int(k1))).raw(int(start), int(n))


def stream_key(seed, scenario, grid_index, sample, channel):
    return rng.stream_key(int(seed), (int(scenario), int(grid_index), int(sample), int(channel)))


def normals_batch(seed, scenario, grid_index, samples, channel, offset, n, nthreads=None):
    samples = np.asarray(samples, dtype=np.int64)
    out = np.empty((len(samples), max(int(n), 0)))
    for r, i in enumerate(samples):
        s = rng.derive_stream(int(seed), (int(scenario), int(grid_index), int(i), int(channel)))
        out[r] = s.normals(int(offset), int(n))
    return out


def ndtri(p):
    return _ndtri(np.asarray(p, dtype=float))


# ---------------------------------------------------------------------------
# probes


def tube_exit_probability(x, y, t, eps) -> np.ndarray:
    """Probability that Brownian bridges ``x -> y`` over time ``t`` leave ``(-eps, eps)``.

    Vectorized image sum; pairs where both boundaries are many standard
    deviations away are reported as 0 exactly.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    w = 2.0 * eps
    up = 2.0 * (eps - x) * (eps - y) / t
    dn = 2.0 * (eps + x) * (eps + y) / t
    terms = 3 + int(math.ceil(2.0 * math.sqrt(t) / w))
    s = np.zeros(x.shape)
    for k in range(-terms, terms + 1):
        kw = k * w
        s += np.exp(-2.0 * kw * (kw + y - x) / t)
        s -= np.exp(-2.0 * (kw + eps - x) * (kw + eps - y) / t)
    out = 1.0 - np.clip(s, 0.0, 1.0)
    out[(up > NEGLIGIBLE) & (dn > NEGLIGIBLE)] = 0.0
    return out


def _unit_path(spec, count: int, stream):
    """Grid values (without the origin) over ``[0, 1]`` and the cell width."""
    h = 1.0 / count
    if isinstance(spec, IbmSpec):
        return gen_ibm_path(TimeGrid(h, count), spec, stream).values[1:], h
    ends, _ = levy_cells(spec, np.full(count, h), stream)
    return ends, h


def smalldev_batch(seed, scenario, grid_index, proc, count, eps, ibm_trans, ibm_chol, bridge,
                   start, stop, nthreads=None):
    """Flags ``sup_{[0,1]} |Y| <= eps_j`` per sample and level; see the compiled kernel."""
    spec, _ = decode_process(proc)
    eps = np.asarray(eps, dtype=float)
    n = max(0, int(stop) - int(start))
    out = np.zeros((n, len(eps)), dtype=np.uint8)
    use_bridge = bool(bridge) and isinstance(spec, LevySpec) and spec.diffusion > 0
    for j in range(n):
        s = rng.derive_stream(int(seed), (int(scenario), int(grid_index), int(start) + j, rng.INNER))
        y, h = _unit_path(spec, int(count), s)
        x = np.concatenate([[0.0], y[:-1]])
        if use_bridge:
            u = rng.to_open_uniform(s.raw(0, 4 * int(count))[2::4])
            t = spec.diffusion**2 * h
        for e, level in enumerate(eps):
            if np.any(np.abs(y) > level):
                continue
            if use_bridge and np.any(u < tube_exit_probability(x, y, t, level)):
                continue
            out[j, e] = 1
    return out


def supabs_batch(seed, scenario, grid_index, proc, count, ibm_trans, ibm_chol, start, stop,
                 nthreads=None):
    spec, _ = decode_process(proc)
    n = max(0, int(stop) - int(start))
    out = np.zeros(n)
    for j in range(n):
        s = rng.derive_stream(int(seed), (int(scenario), int(grid_index), int(start) + j, rng.INNER))
        y, _ = _unit_path(spec, int(count), s)
        out[j] = max(0.0, np.abs(y).max())
    return out


def rw_max_batch(seed, scenario, grid_index, law, steps, level, start, stop, nthreads=None):
    law = decode_law(law)
    n = max(0, int(stop) - int(start))
    out = np.zeros(n, dtype=np.uint8)
    for j in range(n):
        s = rng.derive_stream(int(seed), (int(scenario), int(grid_index), int(start) + j, rng.INNER))
        walk = np.cumsum(rw_increments(law, s, int(steps)))
        out[j] = not np.any(walk > level)
    return out


def _increments_from(law, stream, k: int, n: int) -> np.ndarray:
    if law.code == RADEMACHER:
        return rw_increments(law, stream, k + n)[k:]
    return sample_law(law, stream, k * law.draws, n)


def ladder_batch(seed, scenario, grid_index, law, cap, start, stop, nthreads=None):
    """First strict ascending ladder height per sample (NaN past ``cap`` steps)."""
    law = decode_law(law)
    n = max(0, int(stop) - int(start))
    out = np.full(n, np.nan)
    for j in range(n):
        s = rng.derive_stream(int(seed), (int(scenario), int(grid_index), int(start) + j, rng.INNER))
        x, k, chunk = 0.0, 0, 256
        while k < cap:
            m = min(chunk, int(cap) - k)
            walk = x + np.cumsum(_increments_from(law, s, k, m))
            pos = np.flatnonzero(walk > 0.0)
            if len(pos):
                out[j] = walk[pos[0]]
                break
            x, k, chunk = walk[-1], k + m, chunk * 2
    return out
