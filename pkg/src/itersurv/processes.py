"""Process laws, time grids and sampled paths.

Every process starts at 0.  Specs are immutable value objects; the
generators in :mod:`itersurv.generators` turn them into paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


class ConfigurationError(ValueError):
    """Invalid process, grid or experiment parameters."""


# ---------------------------------------------------------------------------
# grids and paths


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * step`` for ``k = 0..count``."""

    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ConfigurationError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 1:
            raise ConfigurationError(f"grid count must be an integer >= 1, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @property
    def horizon(self) -> float:
        return self.step * self.count

    def times(self) -> np.ndarray:
        return np.arange(self.count + 1) * self.step

    @classmethod
    def over(cls, horizon: float, step: float) -> TimeGrid:
        """Grid covering ``[0, horizon]`` with the given step (rounded to a whole count)."""
        count = max(1, int(round(horizon / step)))
        return cls(horizon / count, count)


@dataclass
class PathSkeleton:
    """Values of one sample path on a grid.

    ``values[k]`` is the path at ``t_k``.  Two-sided processes additionally
    carry ``minus[k]``, the value at ``-t_k``.
    """

    grid: TimeGrid
    values: np.ndarray
    minus: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.count + 1,):
            raise ValueError(
                f"expected {self.grid.count + 1} values, got shape {self.values.shape}"
            )
        if self.minus is not None:
            self.minus = np.asarray(self.minus, dtype=float)

    @classmethod
    def from_values(cls, values, step: float = 1.0) -> PathSkeleton:
        values = np.asarray(values, dtype=float)
        return cls(TimeGrid(step, len(values) - 1), values)

    @property
    def two_sided(self) -> bool:
        return self.minus is not None

    def rows(self):
        """``(time, value)`` pairs in increasing time order."""
        t = self.grid.times()
        if self.minus is not None:
            for k in range(len(self.minus) - 1, 0, -1):
                yield -t[k], self.minus[k]
        for k in range(len(self.values)):
            yield t[k], self.values[k]


# ---------------------------------------------------------------------------
# increment laws

RADEMACHER, GAUSSIAN, LAPLACE, SIGNED_WEIBULL, CONSTANT = range(5)


@dataclass(frozen=True)
class Rademacher:
    code = RADEMACHER
    draws = 1

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return 1.0

    def params(self):
        return (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0
    code = GAUSSIAN
    draws = 1

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigurationError(f"Gaussian sd must be positive, got {self.sd}")

    @property
    def variance(self) -> float:
        return self.sd**2

    def params(self):
        return (self.mean, self.sd, 0.0)


@dataclass(frozen=True)
class Laplace:
    mean: float = 0.0
    scale: float = 1.0
    code = LAPLACE
    draws = 1

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError(f"Laplace scale must be positive, got {self.scale}")

    @property
    def variance(self) -> float:
        return 2.0 * self.scale**2

    def params(self):
        return (self.mean, self.scale, 0.0)


@dataclass(frozen=True)
class SignedWeibull:
    """Symmetric random sign times a Weibull magnitude, shifted by ``offset``.

    ``P(|X - offset| > x) = exp(-(x/scale)**shape)``: stretched-exponential
    tails for ``shape < 1``.
    """

    shape: float = 0.5
    scale: float = 1.0
    offset: float = 0.0
    code = SIGNED_WEIBULL
    draws = 2

    def __post_init__(self):
        if not 0 < self.shape <= 1:
            raise ConfigurationError(f"SignedWeibull shape must be in (0, 1], got {self.shape}")
        if not self.scale > 0:
            raise ConfigurationError(f"SignedWeibull scale must be positive, got {self.scale}")

    @property
    def mean(self) -> float:
        return self.offset

    @property
    def variance(self) -> float:
        return self.scale**2 * math.gamma(1.0 + 2.0 / self.shape)

    def params(self):
        return (self.shape, self.scale, self.offset)


@dataclass(frozen=True)
class Constant:
    value: float = 0.0
    code = CONSTANT
    draws = 0

    @property
    def mean(self) -> float:
        return self.value

    @property
    def variance(self) -> float:
        return 0.0

    def params(self):
        return (self.value, 0.0, 0.0)


IncrementLaw = Union[Rademacher, Gaussian, Laplace, SignedWeibull, Constant]


def tail_class(law: IncrementLaw) -> float | None:
    """Largest ``alpha`` in (0, 1] with ``E exp(|X|^alpha) < inf``-type tails, if known."""
    if isinstance(law, SignedWeibull):
        return law.shape
    if isinstance(law, (Laplace, Gaussian, Rademacher, Constant)):
        return 1.0
    return None


# ---------------------------------------------------------------------------
# process specs


@dataclass(frozen=True)
class RandomWalkSpec:
    """Discrete-time walk ``S_n``; as a function of real time ``S_t = S_floor(t)``."""

    law: IncrementLaw = field(default_factory=Rademacher)

    @property
    def centered(self) -> bool:
        return self.law.mean == 0.0


@dataclass(frozen=True)
class LevySpec:
    """Jump diffusion ``drift*t + diffusion*W_t + compound Poisson(jump_rate, jump_law)``.

    With ``centered=True`` the drift is set to ``-jump_rate * E[jump]`` so that
    ``E[X_1] = 0``.
    """

    drift: float = 0.0
    diffusion: float = 1.0
    jump_rate: float = 0.0
    jump_law: IncrementLaw = field(default_factory=lambda: Constant(0.0))
    centered: bool = False

    def __post_init__(self):
        if self.diffusion < 0:
            raise ConfigurationError(f"diffusion must be nonnegative, got {self.diffusion}")
        if self.jump_rate < 0:
            raise ConfigurationError(f"jump_rate must be nonnegative, got {self.jump_rate}")
        if self.centered:
            comp = -self.jump_rate * self.jump_law.mean
            if self.drift != 0.0 and not math.isclose(self.drift, comp, abs_tol=1e-12):
                raise ConfigurationError(
                    f"centered spec has drift {self.drift}, compensation requires {comp}"
                )
            object.__setattr__(self, "drift", comp + 0.0)
        var = self.diffusion**2 + self.jump_rate * (self.jump_law.variance + self.jump_law.mean**2)
        if not var > 0 and self.drift == 0.0:
            raise ConfigurationError("degenerate Levy spec: X_1 is identically 0")

    @property
    def mean(self) -> float:
        """``E[X_1]``."""
        return self.drift + self.jump_rate * self.jump_law.mean

    @property
    def second_moment(self) -> float:
        """``E[X_1^2]``."""
        return (
            self.diffusion**2
            + self.jump_rate * (self.jump_law.variance + self.jump_law.mean**2)
            + self.mean**2
        )

    @property
    def is_brownian(self) -> bool:
        """Pure (possibly drifted) diffusion: continuous paths."""
        return self.jump_rate == 0.0 and self.diffusion > 0

    @property
    def continuous(self) -> bool:
        return self.jump_rate == 0.0

    @property
    def is_subordinator(self) -> bool:
        if self.diffusion > 0 or self.drift < 0:
            return False
        law = self.jump_law
        if self.jump_rate == 0:
            return self.drift > 0
        if isinstance(law, Constant):
            return law.value >= 0
        return False


def brownian(sigma: float = 1.0) -> LevySpec:
    return LevySpec(diffusion=sigma)


@dataclass(frozen=True)
class IbmSpec:
    """``order``-times integrated Brownian motion (order 0 is Brownian motion)."""

    order: int = 0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ConfigurationError(f"IBM order must be a nonnegative integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))

    @property
    def hurst(self) -> float:
        return (2 * self.order + 1) / 2


@dataclass(frozen=True)
class FbmSpec:
    hurst: float = 0.5
    two_sided: bool = False

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ConfigurationError(f"Hurst parameter must be in (0, 1), got {self.hurst}")


@dataclass(frozen=True)
class TwoSidedSpec:
    """Two-sided process with independent branches ``X^+`` (t >= 0) and ``X^-`` (t < 0)."""

    plus: ProcessSpec
    minus: ProcessSpec

    def __post_init__(self):
        for branch in (self.plus, self.minus):
            if isinstance(branch, (TwoSidedSpec, FbmSpec, ChainSpec)) and not (
                isinstance(branch, FbmSpec) and not branch.two_sided
            ):
                raise ConfigurationError(f"invalid two-sided branch {branch!r}")

    @classmethod
    def symmetric(cls, branch) -> TwoSidedSpec:
        return cls(branch, branch)


@dataclass(frozen=True)
class CounterexampleSpec:
    """Spikes ``X((2n-1)/2)`` equal to 2 w.p. ``1/(n+1)``, else 0; zero elsewhere."""


@dataclass(frozen=True)
class ChainSpec:
    """``|B1| o |B2| o ... o |B_depth|`` for independent Brownian motions.

    Only usable as a continuous inner process; self-similar of index ``2**-depth``.
    """

    depth: int = 1

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ConfigurationError(f"chain depth must be >= 1, got {self.depth}")
        object.__setattr__(self, "depth", int(self.depth))

    @property
    def hurst(self) -> float:
        return 0.5**self.depth


ProcessSpec = Union[
    RandomWalkSpec, LevySpec, IbmSpec, FbmSpec, TwoSidedSpec, CounterexampleSpec, ChainSpec
]


def is_continuous(spec) -> bool:
    """Continuous-path processes, whose range is an interval."""
    if isinstance(spec, LevySpec):
        return spec.continuous
    return isinstance(spec, (IbmSpec, FbmSpec, ChainSpec))


def self_similarity_index(spec) -> float | None:
    if isinstance(spec, LevySpec):
        if spec.is_brownian and spec.drift == 0.0:
            return 0.5
        return None
    if isinstance(spec, (IbmSpec, FbmSpec, ChainSpec)):
        return spec.hurst
    return None
