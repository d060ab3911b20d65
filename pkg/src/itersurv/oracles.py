"""Exact reference probabilities for small or closed-form cases.

Nothing here touches the random streams or the path generators: the
values are computed by dynamic programming, exhaustive enumeration,
series or closed forms, and serve as targets for the Monte Carlo code.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cache

EXACT_DP_LIMIT = 64
ENUM_LIMIT = 12


@dataclass(frozen=True)
class ExactProbability:
    """A probability with the method that produced it.

    ``exact`` holds the rational value when the computation was done in
    exact arithmetic.
    """

    value: float
    method: str
    exact: Fraction | None = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability out of range: {self.value}")
        if self.method not in ("dp", "enumeration", "series", "closed_form"):
            raise ValueError(f"unknown method tag {self.method!r}")

    def __float__(self):
        return self.value


def _prob(value, method):
    if isinstance(value, Fraction):
        return ExactProbability(float(value), method, value)
    return ExactProbability(min(1.0, max(0.0, float(value))), method)


# ---------------------------------------------------------------------------
# simple random walk


def srw_max_dp(n: int, barrier: int) -> ExactProbability:
    """``P(max_{1<=k<=n} S_k <= barrier)`` for the simple symmetric walk.

    Exact rationals up to ``n = 64``, floats beyond.
    """
    n = _positive_int(n, "n")
    barrier = int(barrier)
    if barrier >= n:
        return _prob(Fraction(1), "dp")
    half = Fraction(1, 2) if n <= EXACT_DP_LIMIT else 0.5
    zero = Fraction(0) if n <= EXACT_DP_LIMIT else 0.0
    # dist[x] = P(S_k = x, no earlier kill); position 0 before step 1 is never checked
    dist = {0: Fraction(1) if n <= EXACT_DP_LIMIT else 1.0}
    for _ in range(n):
        nxt = {}
        for x, p in dist.items():
            for y in (x - 1, x + 1):
                if y <= barrier:
                    nxt[y] = nxt.get(y, zero) + p * half
        dist = nxt
    return _prob(sum(dist.values(), zero), "dp")


def srw_paths(n: int):
    """All ``2**n`` step sequences of the simple walk as position tuples ``(S_1..S_n)``."""
    for steps in itertools.product((-1, 1), repeat=n):
        yield tuple(itertools.accumulate(steps))


def srw_max_enum(n: int, barrier: int) -> ExactProbability:
    """Same event as :func:`srw_max_dp`, by listing every path (``n <= 12``)."""
    n = _positive_int(n, "n")
    if n > ENUM_LIMIT:
        raise ValueError(f"enumeration refused for n > {ENUM_LIMIT}")
    good = sum(1 for path in srw_paths(n) if max(path) <= barrier)
    return _prob(Fraction(good, 2**n), "enumeration")


def srw_max_table(n: int) -> dict[int, Fraction]:
    """Enumerated ``P(M_n <= b)`` for every ``b`` in ``[-n, n]`` from one pass."""
    counts = [0] * (2 * n + 1)
    for path in srw_paths(n):
        counts[max(path) + n] += 1
    out, acc = {}, 0
    for b in range(-n, n + 1):
        acc += counts[b + n]
        out[b] = Fraction(acc, 2**n)
    return out


def _outer_survival_on(queries: tuple[int, ...], barrier: int) -> Fraction:
    """``P(X_q <= barrier for all q in queries)``, X a simple walk, queries sorted."""
    if not queries:
        return Fraction(1)
    dist = {0: Fraction(1)}
    t = 0
    for q in queries:
        while t < q:
            nxt = {}
            for x, p in dist.items():
                for y in (x - 1, x + 1):
                    nxt[y] = nxt.get(y, Fraction(0)) + p / 2
            dist = nxt
            t += 1
        dist = {x: p for x, p in dist.items() if x <= barrier}
    return sum(dist.values(), Fraction(0))


def srw_iterated_enum(n: int, barrier: int, include_origin: bool = False) -> ExactProbability:
    """``P(max_{1<=k<=n} X(|S_k|) <= barrier)`` for independent simple walks X, S.

    Every inner path is listed; for each, the outer walk is propagated by
    dynamic programming over its query set ``{|S_k|}``.  ``X(0) = 0`` enters
    the maximum only when some ``S_k = 0`` unless ``include_origin`` is set,
    in which case the value at time 0 is always included (the convention of
    the composition code).
    """
    n = _positive_int(n, "n")
    if n > ENUM_LIMIT:
        raise ValueError(f"enumeration refused for n > {ENUM_LIMIT}")
    barrier = int(barrier)
    memo: dict[tuple, Fraction] = {}
    total = Fraction(0)
    for path in srw_paths(n):
        qs = sorted({abs(s) for s in path})
        has_zero = qs[0] == 0
        if (has_zero or include_origin) and barrier < 0:
            continue
        key = tuple(q for q in qs if q > 0)
        if key not in memo:
            memo[key] = _outer_survival_on(key, barrier)
        total += memo[key]
    return _prob(total / 2**n, "enumeration")


def srw_iterated_bruteforce(n: int, barrier: int, include_origin: bool = False) -> Fraction:
    """The iterated event by listing inner and outer paths jointly (``n <= 8``)."""
    if n > 8:
        raise ValueError("joint enumeration refused for n > 8")
    outer_paths = [(0,) + p for p in srw_paths(n)]
    good = 0
    for inner in srw_paths(n):
        for outer in outer_paths:
            vals = [outer[abs(s)] for s in inner]
            if include_origin:
                vals.append(0)
            good += max(vals) <= barrier
    return Fraction(good, 4**n)


# ---------------------------------------------------------------------------
# Brownian motion


def _phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bm_small_dev_exact(eps: float, tol: float = 1e-12) -> ExactProbability:
    """``P(sup_{[0,1]} |B| <= eps)`` for standard Brownian motion.

    Small ``eps`` uses the eigenfunction series
    ``(4/pi) sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 / (8 eps^2))``; large
    ``eps`` uses the reflection (image) series, which converges fast there.
    Both are alternating with decreasing terms, so truncation stops once
    a term is below ``tol``.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if math.isinf(eps):
        return _prob(1.0, "series")
    total = 0.0
    if eps <= 1.0:
        c = math.pi**2 / (8.0 * eps * eps)
        k = 0
        while True:
            term = 4.0 / math.pi / (2 * k + 1) * math.exp(-((2 * k + 1) ** 2) * c)
            total += term if k % 2 == 0 else -term
            if term < tol:
                break
            k += 1
    else:
        # sum over all integers k of (-1)^k [Phi((2k+1)eps) - Phi((2k-1)eps)]
        total = _phi(eps) - _phi(-eps)
        k = 1
        while True:
            term = (_phi((2 * k + 1) * eps) - _phi((2 * k - 1) * eps)) + (
                _phi((-2 * k + 1) * eps) - _phi((-2 * k - 1) * eps)
            )
            total += term if k % 2 == 0 else -term
            if abs(term) < tol:
                break
            k += 1
    return _prob(total, "series")


def bm_survival_closed_form(horizon: float, x: float) -> ExactProbability:
    """``P(sup_{[0,T]} B <= x) = 2 Phi(x/sqrt(T)) - 1`` by reflection."""
    horizon, x = float(horizon), float(x)
    if not (horizon > 0 and x > 0):
        raise ValueError("T and x must be positive")
    return _prob(math.erf(x / math.sqrt(2.0 * horizon)), "closed_form")


def bm_tube_survival(x: float, y: float, t: float, lower: float, upper: float,
                     terms: int | None = None) -> float:
    """``P(lower < B_s < upper on [0, t] | B_0 = x, B_t = y)`` for a Brownian bridge.

    Method of images, summed over ``k`` in ``[-terms, terms]``.
    """
    if not (lower < x < upper and lower < y < upper):
        return 0.0
    w = upper - lower
    if terms is None:
        terms = 3 + int(math.ceil(2.0 * math.sqrt(t) / w))
    s = 0.0
    for k in range(-terms, terms + 1):
        kw = k * w
        s += math.exp(-2.0 * kw * (kw + y - x) / t)
        s -= math.exp(-2.0 * (kw + upper - x) * (kw + upper - y) / t)
    return min(1.0, max(0.0, s))


# ---------------------------------------------------------------------------
# counterexample


def counterexample_survival_exact(horizon: float, barrier: float = 1.0) -> ExactProbability:
    """Survival of the spike process up to ``horizon``.

    Spikes sit at ``(2n-1)/2`` and equal 2 w.p. ``1/(n+1)``; with a barrier in
    ``[0, 2)`` survival means every spike up to ``horizon`` is 0, a
    telescoping product equal to ``1/(m+1)``.
    """
    horizon = float(horizon)
    if not horizon > 0:
        raise ValueError(f"T must be positive, got {horizon}")
    if barrier < 0:
        return _prob(Fraction(0), "closed_form")
    if barrier >= 2:
        return _prob(Fraction(1), "closed_form")
    m = max(0, math.floor(horizon + 0.5))
    return _prob(_telescope(m), "closed_form")


@cache
def _telescope(m: int) -> Fraction:
    p = Fraction(1)
    for n in range(1, m + 1):
        p *= Fraction(n, n + 1)
    return p


def _positive_int(v, name):
    if int(v) != v or v < 1:
        raise ValueError(f"{name} must be a positive integer, got {v}")
    return int(v)
