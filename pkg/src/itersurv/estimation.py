"""Survival probabilities by Monte Carlo and power-law exponent fits.

Survivor counts are accumulated per batch of consecutive sample indices;
since every sample owns its streams, counts merge by addition and any
batching (or thread count) gives the same totals.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .engine import SurvivalJob, run_job
from .processes import ConfigurationError

DEFAULT_LEVEL = 0.99
DEFAULT_K_MIN = 25
DEFAULT_BATCH = 1 << 14


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return float(ndtri(0.5 + level / 2.0))


def wilson_interval(k: int, n: int, level: float = DEFAULT_LEVEL) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes out of ``n`` trials."""
    k, n = int(k), int(n)
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    z = _z(level)
    z2 = z * z
    p = k / n
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    low = 0.0 if k == 0 else max(0.0, center - half)
    high = 1.0 if k == n else min(1.0, center + half)
    return low, high


@dataclass(frozen=True)
class SurvivalEstimate:
    """Survivor count of ``n_samples`` paths up to ``horizon``.

    ``max_seen`` is the largest scanned maximum among the samples, so an
    unreachable barrier that was nevertheless crossed is visible.
    """

    horizon: float
    barrier: float
    n_samples: int
    n_survived: int
    level: float = DEFAULT_LEVEL
    max_seen: float = float("nan")

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigurationError(f"n_samples must be positive, got {self.n_samples}")
        if not 0 <= self.n_survived <= self.n_samples:
            raise ConfigurationError(
                f"n_survived={self.n_survived} outside [0, {self.n_samples}]"
            )

    @property
    def p_hat(self) -> float:
        return self.n_survived / self.n_samples

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.n_survived, self.n_samples, self.level)

    @property
    def ci_low(self) -> float:
        return self.interval[0]

    @property
    def ci_high(self) -> float:
        return self.interval[1]

    def contains(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= value <= hi

    def row(self) -> dict:
        lo, hi = self.interval
        return {"T": self.horizon, "p_hat": self.p_hat, "ci_low": lo, "ci_high": hi,
                "n_samples": self.n_samples, "n_survived": self.n_survived}


def count_survivors(job: SurvivalJob, n_samples: int, start: int = 0, batch: int = DEFAULT_BATCH,
                    backend=None, nthreads: int | None = None) -> tuple[int, float]:
    """``(survivors, largest maximum)`` over samples ``start .. start+n_samples-1``."""
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be positive, got {n_samples}")
    total, top = 0, -math.inf
    for lo in range(start, start + n_samples, batch):
        hi = min(lo + batch, start + n_samples)
        s, m = run_job(job, lo, hi, backend=backend, nthreads=nthreads)
        total += int(np.count_nonzero(s))
        top = max(top, float(m.max()))
    return total, top


def estimate_survival(job: SurvivalJob, n_samples: int, level: float = DEFAULT_LEVEL,
                      batch: int = DEFAULT_BATCH, backend=None,
                      nthreads: int | None = None) -> SurvivalEstimate:
    """Monte Carlo estimate of ``P(sup_{t<=T} Z_t <= barrier)`` for one job."""
    k, top = count_survivors(job, n_samples, batch=batch, backend=backend, nthreads=nthreads)
    return SurvivalEstimate(job.horizon, job.barrier, int(n_samples), k, level, top)


# ---------------------------------------------------------------------------
# exponent fits


@dataclass(frozen=True)
class ExponentFit:
    """Weighted least-squares line through ``(log T, log p)``.

    ``theta_pred`` and ``theorem`` carry the predicted exponent, when one
    is attached; a fitted slope near ``-theta_pred`` confirms it.
    """

    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    points_used: int
    excluded: tuple = ()
    theta_pred: float | None = None
    theorem: str = ""

    def __post_init__(self):
        if self.points_used < 2:
            raise ValueError("a fit needs at least two points")

    @property
    def deviation(self) -> float | None:
        """``|slope + theta_pred|``, or ``None`` without a prediction."""
        if self.theta_pred is None:
            return None
        return abs(self.slope + self.theta_pred)

    def with_prediction(self, theta: float | None, theorem: str) -> ExponentFit:
        from dataclasses import replace

        return replace(self, theta_pred=theta, theorem=theorem)

    def row(self) -> dict:
        return {"slope": self.slope, "slope_stderr": self.slope_stderr,
                "intercept": self.intercept, "r_squared": self.r_squared,
                "theta_pred": "" if self.theta_pred is None else self.theta_pred,
                "theorem": self.theorem}


def weighted_line(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                  known_variance: bool = True) -> tuple[float, float, float, float]:
    """``(slope, intercept, slope_stderr, r_squared)`` of a weighted least-squares line.

    With ``known_variance`` the weights are inverse variances and the
    standard error is widened only by lack of fit; otherwise it comes from
    the residuals alone.
    """
    x, y, w = (np.asarray(a, dtype=float) for a in (x, y, w))
    sw = w.sum()
    xm, ym = (w * x).sum() / sw, (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if not sxx > 0:
        raise ValueError("fit needs at least two distinct horizons")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_tot = (w * (y - ym) ** 2).sum()
    ss_res = (w * resid**2).sum()
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    # weights are inverse variances, so Var(slope) = 1/sxx; widened by lack of fit
    dof = len(x) - 2
    if known_variance:
        scale = max(1.0, ss_res / dof) if dof > 0 else 1.0
    else:
        scale = ss_res / dof if dof > 0 else math.inf
    return float(slope), float(intercept), float(math.sqrt(scale / sxx)), float(r2)


def _as_point(p):
    """``(T, p_hat, n, k)`` from an estimate or a ``(T, p)`` / ``(T, p, n)`` tuple."""
    if isinstance(p, SurvivalEstimate):
        return p.horizon, p.p_hat, p.n_samples, p.n_survived
    if len(p) == 2:
        return float(p[0]), float(p[1]), math.inf, math.inf
    t, ph, n = float(p[0]), float(p[1]), float(p[2])
    return t, ph, n, ph * n


def fit_exponent(points: Sequence, k_min: int = DEFAULT_K_MIN) -> ExponentFit:
    """Fit ``log p = intercept + slope * log T`` over the usable points.

    Points with fewer than ``k_min`` survivors are excluded (and reported);
    weights ``n p / (1 - p)`` are the inverse delta-method variances of
    ``log p``.  Exact ``(T, p)`` pairs are weighted equally.  A point with
    ``p = 1`` has no sampling variance estimate; its ``1 - p`` is floored
    at ``1/(2n)``.
    """
    rows = [_as_point(p) for p in points]
    used, excluded = [], []
    for t, ph, n, k in rows:
        if k < k_min or ph <= 0 or t <= 0:
            excluded.append(t)
        else:
            used.append((t, ph, n))
    if len(used) < 2:
        raise ValueError(
            f"fit needs >= 2 points with at least {k_min} survivors, got {len(used)}"
        )
    t = np.array([u[0] for u in used])
    ph = np.array([u[1] for u in used])
    n = np.array([u[2] for u in used])
    exact = bool(np.all(np.isinf(n)))
    if exact:
        w = np.ones(len(used))
    elif np.any(np.isinf(n)):
        raise ValueError("cannot mix exact (T, p) pairs with sampled estimates")
    else:
        q = np.maximum(1.0 - ph, 0.5 / n)
        w = n * ph / q
    slope, intercept, se, r2 = weighted_line(np.log(t), np.log(ph), w, known_variance=not exact)
    return ExponentFit(slope, intercept, se, r2, len(used), tuple(excluded))


# ---------------------------------------------------------------------------
# experiment plans


@dataclass(frozen=True)
class ExperimentPlan:
    """A geometric horizon grid, a job per horizon and a sample budget per horizon.

    ``job`` is a :class:`SurvivalJob` whose horizon is replaced per grid
    point.  The grid is ``t0 * ratio**j`` for ``j < count`` unless an
    explicit increasing ``grid`` is given.  Budgets default to
    ``max(n_min, c_budget / p_rough(T))`` with ``p_rough(T) = T^-theta_pred``
    when a prediction exists.
    """

    job: SurvivalJob
    t0: float = 1.0
    ratio: float = 2.0
    count: int = 2
    grid: tuple[float, ...] | None = None
    budgets: tuple[int, ...] | None = None
    n_min: int = 10_000
    n_max: int = 2_000_000
    c_budget: float = 2_000.0
    k_min: int = DEFAULT_K_MIN
    level: float = DEFAULT_LEVEL
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.grid is not None:
            g = tuple(float(t) for t in self.grid)
            if len(g) < 2 or any(b <= a for a, b in zip(g, g[1:])) or g[0] <= 0:
                raise ConfigurationError(f"grid must be >= 2 increasing positive horizons, got {g}")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "t0", g[0])
            object.__setattr__(self, "count", len(g))
        if not self.t0 >= 1 and self.grid is None:
            raise ConfigurationError(f"t0 must be >= 1, got {self.t0}")
        if not self.ratio > 1:
            raise ConfigurationError(f"ratio must be > 1 (the grid must grow), got {self.ratio}")
        if int(self.count) != self.count or self.count < 2:
            raise ConfigurationError(f"count must be an integer >= 2, got {self.count}")
        if self.budgets is not None:
            if len(self.budgets) != self.count:
                raise ConfigurationError(
                    f"budgets has {len(self.budgets)} entries, grid has {self.count}"
                )
            if any(int(b) != b or b < 1 for b in self.budgets):
                raise ConfigurationError(f"budgets must be positive integers, got {self.budgets}")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ConfigurationError("need 1 <= n_min <= n_max")
        if not self.c_budget > 0:
            raise ConfigurationError(f"c_budget must be positive, got {self.c_budget}")

    @property
    def horizons(self) -> list[float]:
        if self.grid is not None:
            return list(self.grid)
        return [self.t0 * self.ratio**j for j in range(self.count)]

    def jobs(self) -> list[SurvivalJob]:
        from dataclasses import replace

        return [replace(self.job, horizon=t, grid_index=j) for j, t in enumerate(self.horizons)]

    def sample_budgets(self, theta: float | None = None) -> list[int]:
        if self.budgets is not None:
            return [int(b) for b in self.budgets]
        out = []
        for t in self.horizons:
            p_rough = t ** -theta if theta else 1.0
            out.append(int(min(self.n_max, max(self.n_min, math.ceil(self.c_budget / p_rough)))))
        return out


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    estimates: list[SurvivalEstimate]
    fit: ExponentFit | None
    prediction: object
    seconds: float = 0.0

    @property
    def deviation(self) -> float | None:
        return None if self.fit is None else self.fit.deviation


def run_experiment(plan: ExperimentPlan, backend=None, nthreads: int | None = None,
                   out_dir=None, manifest_extra: dict | None = None) -> ExperimentResult:
    """Estimate survival at every horizon of the plan, then fit and compare.

    With ``out_dir`` the result table, fit summary and manifest are
    written there (see :mod:`itersurv.results`).
    """
    import time

    from .prediction import predicted_exponent

    pred = predicted_exponent(plan.job)
    budgets = plan.sample_budgets(pred.theta)
    t_start = time.time()
    estimates = [
        estimate_survival(job, n, plan.level, backend=backend, nthreads=nthreads)
        for job, n in zip(plan.jobs(), budgets)
    ]
    try:
        fit = fit_exponent(estimates, plan.k_min).with_prediction(pred.theta, pred.theorem)
    except ValueError:
        fit = None
    res = ExperimentResult(plan, estimates, fit, pred, time.time() - t_start)
    if out_dir is not None:
        from .results import write_experiment

        write_experiment(res, out_dir, budgets=budgets, extra=manifest_extra or {})
    return res
