"""Survival jobs: one (process, horizon, barrier) setting run over many samples.

A :class:`SurvivalJob` is encoded into flat descriptors for the kernels in
:mod:`itersurv._core` (or their numpy twins in :mod:`itersurv._fallback`).
Sample ``i`` of a job uses the streams ``(seed, (scenario, grid_index, i,
channel))``, so any split of ``range(n)`` into batches gives the same
per-sample results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .composition import (
    DEFAULT_FILL_CAP,
    CompositionMode,
    DenseRange,
    ExactAtQueries,
    compose_survival_indicator,
    prefix_sup,
)
from .generators import (
    _fgn_embedding,
    gen_chain_inner,
    gen_fbm_path,
    gen_path,
    ibm_step_matrices,
    spike_count,
)
from .processes import (
    CONSTANT,
    ChainSpec,
    ConfigurationError,
    CounterexampleSpec,
    FbmSpec,
    IbmSpec,
    LevySpec,
    PathSkeleton,
    RandomWalkSpec,
    TimeGrid,
    TwoSidedSpec,
    is_continuous,
)
from .rng import INNER, OUTER_MINUS, OUTER_PLUS, derive_stream

# descriptor layout, mirrored in _core.pyx
K_RW, K_LEVY, K_IBM, K_CEX, K_CHAIN = range(5)
P_KIND, P_LAW, P_MU, P_SIGMA, P_LAM, P_ORDER, P_BRIDGE, P_SIZE = 0, 1, 5, 6, 7, 8, 9, 12
(J_COMPOSE, J_TWO, J_DENSE, J_FILL, J_INNER_STEP, J_INNER_COUNT, J_BASE_STEP, J_BASE_COUNT,
 J_HORIZON, J_STOP, J_BARRIER, J_FILL_CAP) = range(12)
J_SIZE = 12
MAX_IBM_ORDER = 7
DEFAULT_STEP = 2.0**-6


def encode_law(law) -> list[float]:
    return [float(law.code), *map(float, law.params())]


def bridge_default(spec) -> bool:
    """Bridge maxima are used for pure-diffusion Levy processes unless disabled."""
    return isinstance(spec, LevySpec) and spec.jump_rate == 0.0 and spec.diffusion > 0


def encode_process(spec, bridge: bool = False) -> np.ndarray:
    d = np.zeros(P_SIZE)
    if isinstance(spec, RandomWalkSpec):
        d[P_KIND] = K_RW
        d[P_LAW:P_LAW + 4] = encode_law(spec.law)
    elif isinstance(spec, LevySpec):
        d[P_KIND] = K_LEVY
        d[P_LAW:P_LAW + 4] = encode_law(spec.jump_law)
        d[P_MU], d[P_SIGMA], d[P_LAM] = spec.drift, spec.diffusion, spec.jump_rate
        d[P_BRIDGE] = float(bool(bridge))
    elif isinstance(spec, IbmSpec):
        d[P_KIND] = K_IBM
        d[P_ORDER] = spec.order
    elif isinstance(spec, CounterexampleSpec):
        d[P_KIND] = K_CEX
    elif isinstance(spec, ChainSpec):
        d[P_KIND] = K_CHAIN
        d[P_ORDER] = spec.depth
    else:
        raise ConfigurationError(f"no descriptor for {spec!r}")
    if d[P_LAW] != CONSTANT and isinstance(spec, LevySpec) and spec.jump_rate == 0.0:
        d[P_LAW:P_LAW + 4] = [CONSTANT, 0.0, 0.0, 0.0]
    return d


@dataclass(frozen=True)
class SurvivalJob:
    """Survival of a process (baseline) or of an iterated process up to ``horizon``.

    Parameters
    ----------
    process
        The baseline process, or the outer process when ``inner`` is given.
    horizon
        Time horizon ``T``.
    barrier
        Survival means the maximum stays at or below this level.
    inner
        Inner process; ``None`` for a baseline.
    mode, strategy
        Composition mode and range strategy (strategy defaults by inner type).
    step
        Grid step for continuous-time baselines and inner processes.
    inner_steps
        Fixed step count for a continuous inner process (overrides ``step``),
        which keeps the inner discretization self-similar across horizons.
    bridge
        Use exact Brownian-bridge cell maxima for pure-diffusion Levy
        processes; ``None`` means on for baselines and dense ranges.
    stop_above
        Scanning stops at the first value above this level (default: barrier).
    """

    process: object
    horizon: float
    barrier: float = 1.0
    inner: object | None = None
    mode: CompositionMode = CompositionMode.ONE_SIDED_ABS
    strategy: object | None = None
    step: float = DEFAULT_STEP
    inner_steps: int | None = None
    bridge: bool | None = None
    stop_above: float | None = None
    seed: int = 0
    scenario: int = 0
    grid_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", CompositionMode(self.mode))
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if self.inner is not None:
            if self.strategy is None:
                strat = DenseRange() if is_continuous(self.inner) else ExactAtQueries()
                object.__setattr__(self, "strategy", strat)
            if isinstance(self.strategy, DenseRange) and not is_continuous(self.inner):
                raise ConfigurationError("DenseRange needs a continuous inner process")
            if isinstance(self.inner, ChainSpec) and not isinstance(self.strategy, DenseRange):
                raise ConfigurationError("chain inner processes only support DenseRange")
            if isinstance(self.inner, (TwoSidedSpec, CounterexampleSpec)):
                raise ConfigurationError(f"unsupported inner process {self.inner!r}")

    @property
    def two_sided(self) -> bool:
        if self.inner is None:
            return isinstance(self.process, TwoSidedSpec) or (
                isinstance(self.process, FbmSpec) and self.process.two_sided
            )
        return self.mode is CompositionMode.TWO_SIDED

    @property
    def stop(self) -> float:
        return self.barrier if self.stop_above is None else self.stop_above

    def with_grid_index(self, grid_index: int) -> SurvivalJob:
        return replace(self, grid_index=grid_index)

    # grids

    def base_grid(self) -> TimeGrid:
        return TimeGrid.over(self.horizon, self.step)

    def inner_grid(self) -> TimeGrid:
        if isinstance(self.inner, RandomWalkSpec):
            n = int(math.floor(self.horizon))
            if n < 1:
                raise ConfigurationError("a random-walk inner process needs horizon >= 1")
            return TimeGrid(1.0, n)
        if self.inner_steps is not None:
            return TimeGrid(self.horizon / self.inner_steps, int(self.inner_steps))
        return TimeGrid.over(self.horizon, self.step)

    def branches(self):
        p = self.process
        if isinstance(p, TwoSidedSpec):
            return p.plus, p.minus
        return p, p

    def bridges(self) -> tuple[bool, bool]:
        exact = self.inner is not None and not isinstance(self.strategy, DenseRange)
        out = []
        for b in self.branches():
            if exact or not isinstance(b, LevySpec):
                out.append(False)
            elif self.bridge is None:
                out.append(bridge_default(b))
            else:
                out.append(bool(self.bridge))
        return tuple(out)

    def fill_step(self) -> float | None:
        if isinstance(self.strategy, DenseRange):
            return self.strategy.fill_step
        return None

    # encoding

    def uses_fbm(self) -> bool:
        specs = [*self.branches(), self.inner]
        if isinstance(self.process, TwoSidedSpec):
            specs.append(self.process)
        return any(isinstance(s, FbmSpec) for s in specs)

    def kernel_supported(self) -> bool:
        if self.uses_fbm():
            return False
        plus, minus = self.branches()
        if self.inner is None:
            ok = (RandomWalkSpec, LevySpec, IbmSpec, CounterexampleSpec)
            if not (isinstance(plus, ok) and isinstance(minus, ok)):
                return False
            if isinstance(self.process, TwoSidedSpec) and (
                isinstance(plus, IbmSpec) or isinstance(minus, IbmSpec)
            ):
                return isinstance(plus, IbmSpec) and plus == minus
            return True
        outer_ok = (RandomWalkSpec, LevySpec, CounterexampleSpec)
        if not (isinstance(plus, outer_ok) and isinstance(minus, outer_ok)):
            return False
        return isinstance(self.inner, (RandomWalkSpec, LevySpec, IbmSpec, ChainSpec))

    def ibm_spec(self):
        if self.inner is None:
            p = self.branches()[0]
            return p if isinstance(p, IbmSpec) else None
        return self.inner if isinstance(self.inner, IbmSpec) else None

    def encode(self, outer: bool = True) -> dict:
        """Descriptors and matrices for ``survival_batch`` (outer omitted if not ``outer``)."""
        job = np.zeros(J_SIZE)
        plus, minus = self.branches()
        bp, bm = self.bridges()
        job[J_TWO] = float(self.two_sided)
        job[J_HORIZON] = self.horizon
        job[J_STOP] = self.stop
        job[J_BARRIER] = self.barrier
        job[J_FILL_CAP] = DEFAULT_FILL_CAP
        h = 0.0
        if self.inner is None:
            if isinstance(plus, (LevySpec, IbmSpec)) or isinstance(minus, (LevySpec, IbmSpec)):
                g = self.base_grid()
                job[J_BASE_STEP], job[J_BASE_COUNT] = g.step, g.count
                h = g.step
            inner_desc = np.zeros(P_SIZE)
        else:
            job[J_COMPOSE] = 1.0
            job[J_DENSE] = float(isinstance(self.strategy, DenseRange))
            fill = self.fill_step()
            job[J_FILL] = fill if fill is not None else 0.0
            g = self.inner_grid()
            job[J_INNER_STEP], job[J_INNER_COUNT] = g.step, g.count
            h = g.step
            inner_desc = encode_process(self.inner)
        ibm = self.ibm_spec()
        if ibm is not None:
            if ibm.order > MAX_IBM_ORDER:
                raise ConfigurationError(f"IBM order above {MAX_IBM_ORDER} is not supported")
            trans, chol = ibm_step_matrices(ibm.order, h)
            trans, chol = trans.ravel().copy(), chol.ravel().copy()
            if ibm.order == 0:
                trans, chol = np.zeros(0), np.zeros(0)
        else:
            trans, chol = np.zeros(0), np.zeros(0)
        return {
            "job": job,
            "plus": encode_process(plus, bp) if outer else None,
            "minus": encode_process(minus, bm) if outer else None,
            "inner": inner_desc,
            "ibm_trans": trans,
            "ibm_chol": chol,
        }


# ---------------------------------------------------------------------------
# running jobs


def run_job(job: SurvivalJob, start: int, stop: int, backend=None,
            nthreads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(survived, max_value)`` arrays for samples ``start .. stop-1``."""
    be = _backend.get(backend)
    if job.kernel_supported():
        enc = job.encode()
        s, m = be.survival_batch(
            job.seed, job.scenario, job.grid_index, enc["job"], enc["plus"], enc["minus"],
            enc["inner"], enc["ibm_trans"], enc["ibm_chol"], int(start), int(stop),
            nthreads=nthreads,
        )
        return s.astype(bool), m
    if fbm_batch_supported(job):
        return fbm_batch(job, start, stop, be, nthreads)
    return per_sample(job, start, stop)


def sample_streams(job: SurvivalJob, i: int):
    key = (job.scenario, job.grid_index, i)
    return [derive_stream(job.seed, (*key, c)) for c in (INNER, OUTER_PLUS, OUTER_MINUS)]


def inner_path(job: SurvivalJob, stream) -> PathSkeleton:
    g = job.inner_grid()
    if isinstance(job.inner, ChainSpec):
        path = gen_chain_inner(job.inner, job.horizon, g.count, stream)
        # the fill rule refers to the inner time step, not the reparametrized one
        return PathSkeleton(g, path.values, meta=dict(path.meta))
    return gen_path(job.inner, g, stream)


def baseline_values(spec, job: SurvivalJob, stream, bridge: bool) -> np.ndarray:
    from .generators import (
        gen_counterexample_values,
        gen_ibm_path,
        levy_cells,
        rw_increments,
    )

    if isinstance(spec, LevySpec):
        g = job.base_grid()
        ends, sups = levy_cells(spec, np.full(g.count, g.step), stream, bridge=bridge)
        return sups if bridge else ends
    if isinstance(spec, RandomWalkSpec):
        n = int(math.floor(job.horizon))
        return np.cumsum(rw_increments(spec.law, stream, n)) if n else np.zeros(0)
    if isinstance(spec, IbmSpec):
        return gen_ibm_path(job.base_grid(), spec, stream).values[1:]
    if isinstance(spec, CounterexampleSpec):
        m = spike_count(job.horizon)
        return gen_counterexample_values(m, stream) if m else np.zeros(0)
    if isinstance(spec, FbmSpec):
        return gen_fbm_path(job.base_grid(), FbmSpec(spec.hurst), stream).values[1:]
    raise ConfigurationError(f"unsupported baseline process {spec!r}")


def sample_once(job: SurvivalJob, i: int) -> tuple[bool, float]:
    """One sample through the op-level numpy code (no kernels)."""
    s_in, s_plus, s_minus = sample_streams(job, i)
    if job.inner is None:
        p = job.process
        if isinstance(p, FbmSpec) and p.two_sided:
            path = gen_fbm_path(job.base_grid(), p, s_plus)
            mx, hit = prefix_sup(path.values[1:], job.stop)
            if not hit:
                mx = max(mx, prefix_sup(path.minus[1:], job.stop)[0])
            return mx <= job.barrier, mx
        plus, minus = job.branches()
        bp, bm = job.bridges()
        mx, hit = prefix_sup(baseline_values(plus, job, s_plus, bp), job.stop)
        if job.two_sided and not hit:
            mx = max(mx, prefix_sup(baseline_values(minus, job, s_minus, bm), job.stop)[0])
        return mx <= job.barrier, mx
    path = inner_path(job, s_in)
    return compose_survival_indicator(
        job.process, path, job.barrier, job.mode, job.strategy, (s_plus, s_minus),
        stop_above=job.stop, bridge=job.bridges(),
    )


def per_sample(job: SurvivalJob, start: int, stop: int):
    n = max(0, stop - start)
    surv = np.zeros(n, dtype=bool)
    mx = np.zeros(n)
    for j in range(n):
        surv[j], mx[j] = sample_once(job, start + j)
    return surv, mx


# ---------------------------------------------------------------------------
# batched fBm


def fbm_batch_supported(job: SurvivalJob) -> bool:
    p = job.process
    if not isinstance(p, FbmSpec):
        return False
    if job.inner is None:
        return True
    if job.two_sided and not p.two_sided:
        return False
    inner_ok = isinstance(job.inner, (IbmSpec, ChainSpec)) or (
        isinstance(job.inner, LevySpec) and job.inner.continuous
    )
    return inner_ok and isinstance(job.strategy, DenseRange) and job.strategy.fill_step is not None


def _fgn_rows(hurst, size, step, z):
    sq = _fgn_embedding(hurst, size, step)
    m = len(sq)
    return np.fft.fft(sq * (z[:, :m] + 1j * z[:, m:]), axis=1).real


def _scan_rows(plus: np.ndarray, minus: np.ndarray | None, stop: float) -> np.ndarray:
    """Row-wise prefix maximum: plus values first, then minus, stopping above ``stop``."""
    out = np.empty(len(plus))
    for r in range(len(plus)):
        mx, hit = prefix_sup(plus[r], stop)
        if minus is not None and not hit:
            mx = max(mx, prefix_sup(minus[r], stop)[0])
        out[r] = mx
    return out


def fbm_batch(job: SurvivalJob, start: int, stop: int, be, nthreads=None):
    """fBm jobs with one FFT per group of equally sized embeddings."""
    idx = np.arange(start, stop, dtype=np.int64)
    p = job.process
    if job.inner is None:
        g = job.base_grid()
        n = 2 * g.count if p.two_sided else g.count
        if _fgn_embedding(p.hurst, n, g.step) is None:
            return per_sample(job, start, stop)
        z = be.normals_batch(job.seed, job.scenario, job.grid_index, idx, OUTER_PLUS, 0, 4 * n,
                             nthreads=nthreads)
        s = np.cumsum(_fgn_rows(p.hurst, n, g.step, z)[:, :n], axis=1)
        if p.two_sided:
            m = g.count
            s = np.concatenate([np.zeros((len(idx), 1)), s], axis=1)
            plus = s[:, m + 1:] - s[:, m:m + 1]
            minus = s[:, m - 1::-1] - s[:, m:m + 1]
            mx = _scan_rows(plus, minus, job.stop)
        else:
            mx = _scan_rows(s, None, job.stop)
        return mx <= job.barrier, mx

    enc = job.encode(outer=False)
    hi, lo = be.inner_extrema_batch(
        job.seed, job.scenario, job.grid_index, enc["job"], enc["inner"], enc["ibm_trans"],
        enc["ibm_chol"], int(start), int(stop), nthreads=nthreads,
    )
    if job.two_sided:
        reach_p, reach_m = hi, -lo
    else:
        reach_p, reach_m = np.maximum(hi, -lo), np.zeros_like(hi)
    h = job.strategy.fill_step
    kp = np.floor(reach_p / h).astype(np.int64)
    km = np.floor(reach_m / h).astype(np.int64)
    tot = kp + km
    size = np.array([0 if t == 0 else 1 << int(t - 1).bit_length() for t in tot], dtype=np.int64)
    mx = np.zeros(len(idx))
    for sz in np.unique(size):
        rows = np.flatnonzero(size == sz)
        if sz == 0:
            continue
        if _fgn_embedding(p.hurst, int(sz), h) is None:
            for r in rows:
                mx[r] = sample_once(job, int(idx[r]))[1]
            continue
        z = be.normals_batch(job.seed, job.scenario, job.grid_index, idx[rows], OUTER_PLUS, 0,
                             4 * int(sz), nthreads=nthreads)
        noise = _fgn_rows(p.hurst, int(sz), h, z)
        for j, r in enumerate(rows):
            a, b = int(kp[r]), int(km[r])
            s = np.concatenate([[0.0], np.cumsum(noise[j, : a + b])])
            vp = s[b + 1:] - s[b]
            vm = s[b - 1::-1] - s[b] if b else np.zeros(0)
            m1, hit = prefix_sup(vp, job.stop)
            if job.two_sided and not hit:
                m1 = max(m1, prefix_sup(vm, job.stop)[0])
            mx[r] = m1
    return mx <= job.barrier, mx
