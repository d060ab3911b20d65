"""Invariant suite run by ``itersurv validate``.

Quick and full mode run the same list of invariants; quick mode caps every
sample count at 10^4.  Each invariant returns a pass flag and a one-line
detail.  Failures are report content, not exceptions.
"""

from __future__ import annotations

import math
import tempfile
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fluctuation
from .composition import CompositionMode, build_queries, evaluate_levy_at
from .engine import SurvivalJob, run_job
from .estimation import (
    count_survivors,
    estimate_survival,
    fit_exponent,
    wilson_interval,
)
from .generators import (
    gen_ibm_path,
    gen_levy_path,
    gen_path,
    gen_random_walk,
    ibm_step_covariance,
    sample_fgn,
)
from .processes import (
    Constant,
    CounterexampleSpec,
    FbmSpec,
    Gaussian,
    IbmSpec,
    Laplace,
    LevySpec,
    PathSkeleton,
    Rademacher,
    RandomWalkSpec,
    TimeGrid,
    TwoSidedSpec,
    brownian,
)
from .rng import derive_stream

QUICK_CAP = 10_000
VALIDATE_SEED = 20240601


@dataclass
class Context:
    quick: bool
    backend: object = None
    running_extrema: Callable = fluctuation.running_extrema

    def n(self, full: int) -> int:
        return min(int(full), QUICK_CAP) if self.quick else int(full)


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class Report:
    quick: bool
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def names(self) -> list[str]:
        return [f"{c.module}/{c.name}" for c in self.checks]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            out.append(f"{'PASS' if c.passed else 'FAIL'} {c.module}/{c.name} "
                       f"({c.seconds:.2f}s) {c.detail}")
        n_fail = sum(not c.passed for c in self.checks)
        total = sum(c.seconds for c in self.checks)
        mode = "quick" if self.quick else "full"
        out.append(f"{len(self.checks) - n_fail}/{len(self.checks)} invariants passed "
                   f"({mode} mode, {total:.1f}s)")
        return out


INVARIANTS: list[tuple[str, str, Callable]] = []


def invariant(module: str, name: str):
    def deco(fn):
        INVARIANTS.append((module, name, fn))
        return fn
    return deco


def _stream(i: int, channel: int = 0, scenario: int = 9000):
    return derive_stream(VALIDATE_SEED, (scenario, 0, i, channel))


# ---------------------------------------------------------------------------
# core-rng


@invariant("core-rng", "reproducible-and-distinct-streams")
def _rng_streams(ctx):
    a = derive_stream(1, (0, 0, 0, 0)).take_uniforms(100)
    b = derive_stream(1, (0, 0, 0, 0)).take_uniforms(100)
    c = derive_stream(1, (0, 0, 1, 0)).take_uniforms(100)
    d = derive_stream(2, (0, 0, 0, 0)).take_uniforms(100)
    ok = np.array_equal(a, b) and not np.array_equal(a, c) and not np.array_equal(a, d)
    return ok, "same key repeats, other key or seed differs"


@invariant("core-rng", "normal-moments")
def _rng_normals(ctx):
    n = ctx.n(10**6)
    z = _stream(0).take_normals(n)
    m, v = float(z.mean()), float(z.var())
    ok = abs(m) <= 5 / math.sqrt(n) and abs(v - 1) <= 5 * math.sqrt(2 / n)
    return ok, f"n={n} mean={m:.5f} var={v:.5f}"


@invariant("core-rng", "uniform-range-and-mean")
def _rng_uniforms(ctx):
    n = ctx.n(10**6)
    u = _stream(1).take_uniforms(n)
    m = float(u.mean())
    ok = bool(np.all((u >= 0) & (u < 1))) and abs(m - 0.5) <= 5 * math.sqrt(1 / 12 / n)
    return ok, f"n={n} mean={m:.5f}"


@invariant("core-rng", "parallel-serial-equivalence")
def _rng_parallel(ctx):
    job = SurvivalJob(brownian(), 64.0, inner=brownian(), inner_steps=256, seed=3)
    n = ctx.n(20_000)
    serial, _ = count_survivors(job, n, batch=n, backend=ctx.backend, nthreads=1)
    chunks = [(lo, min(lo + 997, n)) for lo in range(0, n, 997)]
    shuffled = sum(int(run_job(job, lo, hi, backend=ctx.backend)[0].sum())
                   for lo, hi in reversed(chunks))
    threaded, _ = count_survivors(job, n, batch=4096, backend=ctx.backend, nthreads=None)
    return serial == shuffled == threaded, f"survivors serial={serial} shuffled={shuffled} " \
                                           f"threaded={threaded}"


# ---------------------------------------------------------------------------
# generators


@invariant("generators", "paths-anchored-at-zero")
def _gen_anchor(ctx):
    specs = [brownian(), LevySpec(diffusion=0.5, jump_rate=2.0, jump_law=Laplace(0.0, 1.0)),
             IbmSpec(2), FbmSpec(0.3), FbmSpec(0.7, True), CounterexampleSpec(),
             TwoSidedSpec(brownian(), brownian())]
    bad = []
    for j, spec in enumerate(specs):
        p = gen_path(spec, TimeGrid(0.25, 16), _stream(j), _stream(j, 2))
        if p.values[0] != 0 or (p.minus is not None and p.minus[0] != 0):
            bad.append(type(spec).__name__)
    rw = gen_random_walk(10, Gaussian(0.5, 1.0), _stream(99))
    if rw.values[0] != 0:
        bad.append("RandomWalk")
    return not bad, "all families start at 0" if not bad else f"nonzero anchor: {bad}"


@invariant("generators", "rademacher-unit-steps")
def _gen_rademacher(ctx):
    ok = all(np.all(np.abs(np.diff(gen_random_walk(200, Rademacher(), _stream(i)).values)) == 1)
             for i in range(20))
    return ok, "|S_k - S_(k-1)| = 1"


@invariant("generators", "ibm-step-covariance-closed-form")
def _gen_ibm_cov(ctx):
    worst = 0.0
    for order in range(4):
        for h in (0.1, 1.0, 2.0):
            c = ibm_step_covariance(order, h)
            for j in range(order + 1):
                for k in range(order + 1):
                    want = h ** (j + k + 1) / (math.factorial(j) * math.factorial(k) * (j + k + 1))
                    worst = max(worst, abs(c[j, k] - want) / want)
    return worst < 1e-12, f"max relative error {worst:.1e}"


@invariant("generators", "trapezoid-integral-converges-to-exact-recursion")
def _gen_ibm_trapezoid(ctx):
    # exact variance of the trapezoid integral of BM sampled on m cells of [0, 1]
    target = ibm_step_covariance(1, 1.0)[1, 1]
    errs = []
    for m in (4, 16, 64):
        t = np.linspace(0.0, 1.0, m + 1)
        w = np.full(m + 1, 1.0 / m)
        w[0] = w[-1] = 0.5 / m
        cov = np.minimum.outer(t, t)
        errs.append(abs(float(w @ cov @ w) - target))
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    n = ctx.n(20_000)
    y = np.array([gen_ibm_path(TimeGrid(0.25, 4), IbmSpec(1), _stream(i, scenario=9001)).values[-1]
                  for i in range(n)])
    v = float(y.var())
    mc_ok = abs(v - target) <= 5 * target * math.sqrt(2 / n)
    return decreasing and errs[-1] < 1e-3 and mc_ok, \
        f"trapezoid errors {', '.join(f'{e:.1e}' for e in errs)}; recursion Var={v:.4f} (n={n})"


@invariant("generators", "brownian-self-similarity")
def _gen_self_similar(ctx):
    from scipy.stats import ks_2samp

    n = ctx.n(10_000)
    sups = []
    for k, horizon in enumerate((1.0, 4.0)):
        grid = TimeGrid.over(horizon, horizon / 64)
        sups.append(np.array([
            np.abs(gen_levy_path(grid, brownian(), _stream(i, scenario=9002 + k)).values).max()
            for i in range(n)]) / math.sqrt(horizon))
    stat = ks_2samp(sups[0], sups[1]).statistic
    crit = 1.949 * math.sqrt(2.0 / n)
    return stat < crit, f"KS statistic {stat:.4f} < {crit:.4f} (0.1% level, n={n})"


@invariant("generators", "fgn-increment-variance")
def _gen_fgn(ctx):
    n = ctx.n(50_000)
    worst = 0.0
    ok = True
    for h in (0.25, 0.75):
        dt = 0.1
        x = np.array([sample_fgn(h, 32, dt, _stream(i, scenario=9004))[0][7] for i in range(n)])
        want = dt ** (2 * h)
        z = abs(float(x.var()) - want) / (want * math.sqrt(2 / n))
        worst = max(worst, z)
        ok &= z <= 5
    return ok, f"largest deviation {worst:.2f} sigma (n={n})"


# ---------------------------------------------------------------------------
# composition


_LEVY = LevySpec(diffusion=1.0, jump_rate=1.0, jump_law=Laplace(0.5, 1.0), centered=True)


@invariant("composition", "barrier-monotonicity")
def _comp_monotone(ctx):
    base = SurvivalJob(_LEVY, 64.0, inner=RandomWalkSpec(Rademacher()), seed=5, stop_above=math.inf)
    n = ctx.n(20_000)
    prev = None
    ok = True
    for b in (0.0, 0.5, 1.0, 2.0):
        s, _ = run_job(replace(base, barrier=b), 0, n, backend=ctx.backend)
        if prev is not None:
            ok &= bool(np.all(prev <= s))
        prev = s
    return ok, f"survived(b1) <= survived(b2) pathwise over {n} samples"


@invariant("composition", "one-two-sided-consistency")
def _comp_consistency(ctx):
    inner = LevySpec(drift=0.5, diffusion=0.0, jump_rate=1.0, jump_law=Constant(1.0))
    one = SurvivalJob(_LEVY, 32.0, inner=inner, step=0.25, seed=11)
    two = replace(one, process=TwoSidedSpec(_LEVY, brownian()), mode=CompositionMode.TWO_SIDED)
    n = ctx.n(5_000)
    s1, m1 = run_job(one, 0, n, backend=ctx.backend)
    s2, m2 = run_job(two, 0, n, backend=ctx.backend)
    ok = np.array_equal(s1, s2) and np.array_equal(m1, m2)
    return ok, f"nonnegative inner: identical (survived, max) on {n} samples"


@invariant("composition", "duplicate-queries-share-values")
def _comp_duplicates(ctx):
    inner = PathSkeleton(TimeGrid(1.0, 6), np.array([0.0, 1.0, 2.0, 1.0, -2.0, 0.5, 2.0]))
    ok = True
    for mode in CompositionMode:
        plus, _ = build_queries(inner, mode)
        vals = evaluate_levy_at(plus, _LEVY, _stream(0, scenario=9005))
        z = {}
        raw = inner.values[1:] if mode is CompositionMode.TWO_SIDED else np.abs(inner.values[1:])
        for k, idx in enumerate(plus.backmap):
            if idx >= 0:
                z.setdefault(raw[k], set()).add(vals[idx])
        ok &= all(len(v) == 1 for v in z.values()) and len(plus) == len(z)
    return ok, "one outer value per distinct query"


@invariant("composition", "levy-query-exactness")
def _comp_exact(ctx):
    n = ctx.n(100_000)
    q = np.array([0.5, 2.0])
    x = np.array([evaluate_levy_at(q, _LEVY, _stream(i, scenario=9006)) for i in range(n)])
    inc = np.column_stack([x[:, 0], x[:, 1] - x[:, 0]])
    worst = 0.0
    for j, gap in enumerate((0.5, 1.5)):
        var = gap * _LEVY.second_moment
        worst = max(worst, abs(inc[:, j].mean()) / math.sqrt(var / n))
        m4 = float(np.mean((inc[:, j] - inc[:, j].mean()) ** 4))
        worst = max(worst, abs(inc[:, j].var() - var) / math.sqrt(max(m4 - var**2, 1e-300) / n))
    return worst <= 5, f"gap mean/variance within {worst:.2f} sigma (n={n})"


# ---------------------------------------------------------------------------
# fluctuation-stats


def _walks(count: int, steps: int = 200, law=None):
    law = law or Laplace(0.1, 1.0)
    return [gen_random_walk(steps, law, _stream(i, scenario=9007)) for i in range(count)]


@invariant("fluctuation-stats", "running-extrema-ordering")
def _fl_extrema(ctx):
    ok = True
    for p in _walks(200):
        r = ctx.running_extrema(p)
        ok &= bool(np.all(np.diff(r.maxima) >= 0) and np.all(np.diff(r.minima) <= 0)
                   and np.all(r.minima <= r.maxima))
    return ok, "M nondecreasing, I nonincreasing, I <= M"


@invariant("fluctuation-stats", "ladder-heights-reconstruct-maxima")
def _fl_ladder(ctx):
    ok = True
    checked = 0
    for p in _walks(200):
        lad = fluctuation.ladder_decomposition(p, "ascending")
        if not len(lad):
            continue
        m = ctx.running_extrema(p).maxima
        sums = np.cumsum(lad.heights)
        ok &= bool(np.all(lad.heights > 0) and np.allclose(sums, p.values[lad.epochs], atol=1e-9)
                   and np.allclose(sums, m[lad.epochs - 1], atol=1e-9))
        checked += len(lad)
    return ok, f"partial height sums equal S and M at {checked} epochs"


@invariant("fluctuation-stats", "ladder-mirror-symmetry")
def _fl_mirror(ctx):
    ok = True
    for p in _walks(100):
        a = fluctuation.ladder_decomposition(p, "ascending")
        d = fluctuation.ladder_decomposition(PathSkeleton(p.grid, -p.values), "descending")
        ok &= np.array_equal(a.epochs, d.epochs) and np.array_equal(a.heights, d.heights)
    return ok, "ascending(P) equals descending(-P)"


@invariant("fluctuation-stats", "small-deviations-monotone-in-eps")
def _fl_smalldev(ctx):
    eps = [0.4, 0.5, 0.75, 1.0, 1.5]
    pts = fluctuation.small_deviation_curve(brownian(), eps, ctx.n(20_000), seed=VALIDATE_SEED,
                                            backend=ctx.backend)
    hits = [p.n_hits for p in pts]
    return all(b >= a for a, b in zip(hits, hits[1:])), f"hits {hits}"


@invariant("fluctuation-stats", "srw-exit-matches-dp")
def _fl_srw(ctx):
    from .oracles import srw_max_dp

    n = ctx.n(100_000)
    bad = []
    for b in range(5):
        job = SurvivalJob(RandomWalkSpec(Rademacher()), 16.0, barrier=float(b), seed=13)
        k, _ = count_survivors(job, n, backend=ctx.backend)
        lo, hi = wilson_interval(k, n, 0.999)
        if not lo <= srw_max_dp(16, b).value <= hi:
            bad.append(b)
    return not bad, f"barriers 0..4 inside Wilson 99.9% (n={n})" if not bad else f"mismatch at {bad}"


# ---------------------------------------------------------------------------
# estimation


@invariant("estimation", "slope-invariant-under-time-rescaling")
def _est_scale(ctx):
    ts = np.array([16.0, 64.0, 256.0, 1024.0])
    f1 = fit_exponent([(t, 5 * t**-0.25) for t in ts])
    f2 = fit_exponent([(7.3 * t, 5 * t**-0.25) for t in ts])
    return abs(f1.slope - f2.slope) < 1e-9, f"slopes {f1.slope:.12f}, {f2.slope:.12f}"


@invariant("estimation", "bit-reproducible-estimates")
def _est_repro(ctx):
    job = SurvivalJob(FbmSpec(0.5, True), 16.0, step=0.25, seed=17)
    n = ctx.n(5_000)
    a = estimate_survival(job, n, backend=ctx.backend)
    b = estimate_survival(job, n, backend=ctx.backend)
    return a == b, f"n_survived {a.n_survived} twice"


@invariant("estimation", "nested-barriers")
def _est_nested(ctx):
    job = SurvivalJob(brownian(), 64.0, inner=brownian(), inner_steps=256, seed=19)
    n = ctx.n(20_000)
    ks = [count_survivors(replace(job, barrier=b), n, backend=ctx.backend)[0]
          for b in (0.25, 0.5, 1.0, 2.0)]
    return all(b >= a for a, b in zip(ks, ks[1:])), f"survivors {ks}"


@invariant("estimation", "wilson-calibration")
def _est_calibration(ctx):
    from .oracles import srw_max_dp

    target = srw_max_dp(16, 0).value
    reps, n = 200, ctx.n(20_000)
    job = SurvivalJob(RandomWalkSpec(Rademacher()), 16.0, barrier=0.0, seed=23)
    s, _ = run_job(job, 0, reps * n, backend=ctx.backend)
    k = s.reshape(reps, n).sum(axis=1)
    covered = sum(lo <= target <= hi for lo, hi in (wilson_interval(int(x), n, 0.99) for x in k))
    return covered >= 0.99 * reps, f"{covered}/{reps} intervals contain {target:.6f} (n={n})"


# ---------------------------------------------------------------------------
# oracles


@invariant("oracles", "dp-equals-enumeration")
def _or_enum(ctx):
    from .oracles import srw_max_dp, srw_max_enum

    top = 10 if ctx.quick else 12
    ok = all(srw_max_dp(n, b).exact == srw_max_enum(n, b).exact
             for n in range(1, top + 1) for b in range(-n, n + 1))
    return ok, f"all N <= {top}, barriers -N..N"


@invariant("oracles", "dp-monotone")
def _or_monotone(ctx):
    from .oracles import srw_max_dp

    ok = True
    for n in range(1, 30):
        for b in range(-3, 6):
            p = srw_max_dp(n, b).exact
            ok &= srw_max_dp(n + 1, b).exact <= p <= srw_max_dp(n, b + 1).exact
    return ok, "nonincreasing in N, nondecreasing in the barrier"


@invariant("oracles", "bm-survival-rate")
def _or_bm_rate(ctx):
    from .oracles import bm_survival_closed_form

    t = 1e8
    r = bm_survival_closed_form(t, 1.0).value * math.sqrt(t) / math.sqrt(2 / math.pi)
    return abs(r - 1) < 1e-3, f"sqrt(T) P / (x sqrt(2/pi)) = {r:.6f} at T=1e8"


@invariant("oracles", "small-deviation-rate")
def _or_smalldev_rate(ctx):
    from .oracles import bm_small_dev_exact

    vals = [bm_small_dev_exact(e).value for e in (0.2, 0.3, 0.5, 1.0, 2.0)]
    r = math.log(bm_small_dev_exact(0.2).value) / (-(math.pi**2) / 8 / 0.04)
    ok = all(b > a for a, b in zip(vals, vals[1:])) and abs(r - 1) < 0.02
    return ok, f"log P / (-(pi^2/8) eps^-2) = {r:.4f} at eps=0.2"


@invariant("oracles", "counterexample-matches-monte-carlo")
def _or_counter(ctx):
    from .oracles import counterexample_survival_exact

    n = ctx.n(100_000)
    bad = []
    for j, t in enumerate((0.4, 1.5, 4.5, 10.5)):
        e = estimate_survival(SurvivalJob(CounterexampleSpec(), t, seed=29, grid_index=j), n,
                              backend=ctx.backend)
        if not e.contains(counterexample_survival_exact(t).value):
            bad.append(t)
    return not bad, f"T in (0.4, 1.5, 4.5, 10.5), n={n}" if not bad else f"mismatch at T={bad}"


# ---------------------------------------------------------------------------
# cli-runner


@invariant("cli-runner", "manifest-reproduces-results")
def _cli_manifest(ctx):
    from .config import parse_config, plan_from_dict
    from .estimation import run_experiment

    plan = plan_from_dict({
        "experiment": {"seed": 31, "name": "validate"},
        "grid": {"t0": 8, "ratio": 2, "count": 3, "budgets": [ctx.n(5_000)] * 3},
        "process": {"kind": "levy", "diffusion": 1.0, "jump_rate": 1.0,
                    "jump_law": {"kind": "laplace", "mean": 0.5, "scale": 1.0}, "centered": True},
        "inner": {"kind": "rw", "law": {"kind": "rademacher"}},
    })
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        run_experiment(plan, backend=ctx.backend, out_dir=a)
        again = parse_config(a / "manifest.json")
        run_experiment(again, backend=ctx.backend, out_dir=b)
        same = all((a / f).read_bytes() == (b / f).read_bytes()
                   for f in ("survival.csv", "fit.csv"))
    return same and again == plan, "re-run from manifest gives identical CSVs"


@invariant("cli-runner", "preset-predictions-from-rules")
def _cli_presets(ctx):
    from .prediction import predicted_exponent
    from .presets import get_preset, preset_names

    missing = [n for n in preset_names()
               if not predicted_exponent(get_preset(n).plan().job).available]
    return not missing, "every preset has a rule-derived prediction" if not missing \
        else f"no prediction: {missing}"


# ---------------------------------------------------------------------------


def mutant_running_extrema(path) -> fluctuation.RunningExtrema:
    """Deliberately wrong running extrema (window shifted by one); a mutation fixture."""
    v = fluctuation._values(path)[:-1]
    return fluctuation.RunningExtrema(np.maximum.accumulate(v), np.minimum.accumulate(v))


def run_validation(quick: bool = True, backend=None, only: list[str] | None = None,
                   running_extrema: Callable | None = None) -> Report:
    """Run every invariant (or those whose ``module/name`` contains an entry of ``only``)."""
    ctx = Context(quick, backend, running_extrema or fluctuation.running_extrema)
    report = Report(quick)
    for module, name, fn in INVARIANTS:
        key = f"{module}/{name}"
        if only and not any(o in key for o in only):
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(ctx)
        except Exception as exc:  # a crash is a failed invariant, reported like the others
            ok, detail = False, f"error: {type(exc).__name__}: {exc}"
        report.checks.append(CheckResult(module, name, bool(ok), detail,
                                         time.perf_counter() - t0))
    return report
