"""Predicted survival exponents for baselines and iterated processes.

Each rule checks the structural hypotheses it needs (centering, moment
classes, path continuity, composition mode) and returns the exponent with
a short tag naming the result it comes from.  Hypotheses that cannot be
checked structurally are reported as warnings, not silently assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .composition import CompositionMode, CompositionSpec
from .processes import (
    ChainSpec,
    CounterexampleSpec,
    FbmSpec,
    IbmSpec,
    LevySpec,
    RandomWalkSpec,
    TwoSidedSpec,
    is_continuous,
    self_similarity_index,
    tail_class,
)

# tags
LEVY_ONE_SIDED = "levy-one-sided"
RW_ONE_SIDED = "random-walk-one-sided"
INTEGRATED_BM = "integrated-bm"
MOLCHAN = "fbm-molchan"
MOLCHAN_TWO_SIDED = "fbm-molchan-two-sided"
SPIKES = "spike-counterexample"
TWO_SIDED_PRODUCT = "two-sided-independent-branches"
SELF_SIMILAR_INNER = "self-similar-inner"
LEVY_AT_RW_CENTERED = "levy-at-rw-centered"
LEVY_AT_RW_DRIFTED = "levy-at-rw-drifted"
SUBORDINATED = "symmetric-levy-at-subordinator"
TWO_SIDED_SELF_SIMILAR = "two-sided-self-similar-inner"
TWO_SIDED_LEVY_AT_RW = "two-sided-levy-at-rw"
FBM_TWO_SIDED_INNER = "fbm-two-sided-self-similar-inner"
NONE = "none"


@dataclass(frozen=True)
class Prediction:
    """Predicted exponent ``theta`` (``None`` when no rule applies)."""

    theta: float | None
    theorem: str
    warnings: tuple[str, ...] = ()

    @property
    def available(self) -> bool:
        return self.theta is not None


def _none(reason: str) -> Prediction:
    return Prediction(None, NONE, (reason,))


# ---------------------------------------------------------------------------
# structural checks


def _law_mean(spec) -> float:
    if isinstance(spec, RandomWalkSpec):
        return spec.law.mean
    return spec.mean


def _second_moment(spec) -> float:
    if isinstance(spec, RandomWalkSpec):
        return spec.law.variance + spec.law.mean**2
    return spec.second_moment


def stretched_exp_class(spec) -> float | None:
    """``alpha`` with ``E exp(|X_1|^alpha) < inf`` for a Levy process or walk, if known."""
    if isinstance(spec, RandomWalkSpec):
        return _tail_alpha(spec.law)
    if isinstance(spec, LevySpec):
        if spec.jump_rate == 0.0:
            return 1.0
        return _tail_alpha(spec.jump_law)
    return None


def _tail_alpha(law) -> float | None:
    a = tail_class(law)
    if a is None:
        return None
    scale = getattr(law, "scale", None)
    if a < 1.0 and scale is not None and scale >= 1.0:
        # exp(|X|^a) integrable needs the Weibull scale below 1; any smaller
        # exponent still works
        return a / 2.0
    return a


def is_levy_outer(spec) -> bool:
    """Centered Levy process with positive variance and stretched-exponential moments."""
    return (
        isinstance(spec, LevySpec)
        and abs(spec.mean) < 1e-12
        and spec.second_moment > 0
        and stretched_exp_class(spec) is not None
    )


def is_symmetric_levy(spec) -> bool:
    if not isinstance(spec, LevySpec) or spec.drift != 0.0:
        return False
    if spec.jump_rate == 0.0:
        return True
    law = spec.jump_law
    return law.mean == 0.0 and type(law).__name__ in ("Gaussian", "Laplace", "Rademacher",
                                                      "SignedWeibull")


def small_deviation_order(spec) -> float | None:
    """Polynomial order ``rho`` with ``P(sup_[0,1] |Y| <= eps) <~ eps^rho``.

    Brownian motion, its integrals, fBm and the Brownian chain all have
    exponentially small deviations, so every ``rho`` works (``inf``).
    """
    if isinstance(spec, LevySpec) and spec.is_brownian and spec.drift == 0.0:
        return math.inf
    if isinstance(spec, (IbmSpec, FbmSpec, ChainSpec)):
        return math.inf
    return None


def one_sided_extrema_moment_order(spec) -> float | None:
    """Order ``eta`` with ``P(sup Y <= eps)``, ``P(-inf Y <= eps) <~ eps^eta`` on ``[0, 1]``."""
    if isinstance(spec, LevySpec) and spec.is_brownian and spec.drift == 0.0:
        return 1.0
    return None


# ---------------------------------------------------------------------------
# baselines


def baseline_exponent(spec) -> Prediction:
    """Survival exponent of ``P(sup_{[0,T]} X <= 1)`` for a bare process."""
    if isinstance(spec, LevySpec):
        if is_levy_outer(spec) or (abs(spec.mean) < 1e-12 and spec.second_moment > 0):
            return Prediction(0.5, LEVY_ONE_SIDED)
        return _none("non-centered Levy process: no polynomial survival exponent")
    if isinstance(spec, RandomWalkSpec):
        if spec.centered and spec.law.variance > 0:
            return Prediction(0.5, RW_ONE_SIDED)
        return _none("non-centered random walk: no polynomial survival exponent")
    if isinstance(spec, IbmSpec):
        if spec.order == 0:
            return Prediction(0.5, LEVY_ONE_SIDED)
        if spec.order == 1:
            return Prediction(0.25, INTEGRATED_BM)
        return _none(f"survival exponent of {spec.order}-times integrated BM is not known")
    if isinstance(spec, FbmSpec):
        if spec.two_sided:
            return Prediction(1.0, MOLCHAN_TWO_SIDED)
        return Prediction(1.0 - spec.hurst, MOLCHAN)
    if isinstance(spec, CounterexampleSpec):
        return Prediction(1.0, SPIKES)
    if isinstance(spec, TwoSidedSpec):
        a, b = baseline_exponent(spec.plus), baseline_exponent(spec.minus)
        if a.available and b.available:
            return Prediction(a.theta + b.theta, TWO_SIDED_PRODUCT, a.warnings + b.warnings)
        return _none("a branch has no known exponent")
    return _none(f"no baseline rule for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# compositions


def _discrete_or_levy_inner(inner) -> bool:
    return isinstance(inner, (RandomWalkSpec, LevySpec))


def _inner_moment_ok(inner) -> bool:
    return _second_moment(inner) > 0 and stretched_exp_class(inner) is not None


def _one_sided(outer, inner) -> Prediction:
    h = self_similarity_index(inner)
    if h is not None and is_continuous(inner):
        base = baseline_exponent(outer)
        if not base.available:
            return _none("outer process has no known survival exponent")
        warns = list(base.warnings)
        rho = small_deviation_order(inner)
        if rho is None:
            warns.append("small-deviation order of the inner process unknown; hypothesis unchecked")
        elif not rho > base.theta:
            warns.append(f"small-deviation order {rho} does not exceed theta={base.theta}")
        return Prediction(base.theta * h, SELF_SIMILAR_INNER, tuple(warns))
    if _discrete_or_levy_inner(inner):
        if isinstance(inner, LevySpec) and inner.is_subordinator and is_symmetric_levy(outer):
            return Prediction(0.5, SUBORDINATED)
        if not is_levy_outer(outer):
            return _none("random-walk/Levy inner needs a centered Levy outer process "
                         "with stretched-exponential moments")
        if not _inner_moment_ok(inner):
            return _none("inner increments need positive variance and stretched-exponential moments")
        if abs(_law_mean(inner)) < 1e-12:
            return Prediction(0.25, LEVY_AT_RW_CENTERED)
        return Prediction(0.5, LEVY_AT_RW_DRIFTED)
    return _none(f"no rule for inner process {type(inner).__name__}")


def _two_sided(outer, inner) -> Prediction:
    if isinstance(outer, FbmSpec):
        if not outer.two_sided:
            return _none("two-sided composition needs a two-sided fBm outer")
        lam = self_similarity_index(inner)
        if lam is None or not is_continuous(inner):
            return _none("fBm outer needs a continuous self-similar inner process")
        warns = ()
        if one_sided_extrema_moment_order(inner) is None:
            warns = ("negative moments of the inner one-sided extrema unchecked",)
        return Prediction(lam, FBM_TWO_SIDED_INNER, warns)
    if not isinstance(outer, TwoSidedSpec):
        return _none("two-sided composition needs a two-sided outer process")
    plus, minus = outer.plus, outer.minus
    h = self_similarity_index(inner)
    if h is not None and is_continuous(inner):
        a, b = baseline_exponent(plus), baseline_exponent(minus)
        if not (a.available and b.available):
            return _none("a branch of the outer process has no known exponent")
        warns = list(a.warnings + b.warnings)
        eta = one_sided_extrema_moment_order(inner)
        if eta is None:
            warns.append("joint negative moment of the inner extrema unchecked")
        elif not (a.theta < eta and b.theta < eta):
            warns.append(f"branch exponents must be below {eta} for the moment condition")
        return Prediction(h * (a.theta + b.theta), TWO_SIDED_SELF_SIMILAR, tuple(warns))
    if _discrete_or_levy_inner(inner):
        if not (is_levy_outer(plus) and is_levy_outer(minus)):
            return _none("branches must be centered Levy processes with stretched-exponential moments")
        if not _inner_moment_ok(inner):
            return _none("inner increments need positive variance and stretched-exponential moments")
        return Prediction(0.5, TWO_SIDED_LEVY_AT_RW)
    return _none(f"no rule for inner process {type(inner).__name__}")


def predicted_exponent(setup) -> Prediction:
    """Predicted exponent for a :class:`CompositionSpec`, a survival job or a bare process."""
    outer = getattr(setup, "outer", None)
    if outer is None and hasattr(setup, "process"):
        outer = setup.process
    if outer is None:
        return baseline_exponent(setup)
    inner = getattr(setup, "inner", None)
    if inner is None:
        return baseline_exponent(outer)
    mode = CompositionMode(getattr(setup, "mode", CompositionMode.ONE_SIDED_ABS))
    if isinstance(outer, CounterexampleSpec) and not is_continuous(inner):
        return _none("spike outer at discrete inner times: survival is degenerate")
    if mode is CompositionMode.TWO_SIDED:
        return _two_sided(outer, inner)
    if isinstance(outer, TwoSidedSpec):
        return _none("one-sided composition uses only t >= 0; pass the branch process")
    return _one_sided(outer, inner)


__all__ = ["CompositionSpec", "Prediction", "baseline_exponent", "predicted_exponent"]
