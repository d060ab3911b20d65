"""Survival probabilities and survival exponents of iterated stochastic processes.

Sample paths of an outer process read off along the range of an
independent inner process, Monte Carlo survival estimates, power-law
exponent fits and exact reference values for small cases.
"""

__version__ = "0.1.0"

from . import _backend
from .composition import CompositionMode, CompositionSpec, DenseRange, ExactAtQueries
from .engine import SurvivalJob, run_job
from .estimation import (
    ExperimentPlan,
    ExponentFit,
    SurvivalEstimate,
    estimate_survival,
    fit_exponent,
    run_experiment,
    wilson_interval,
)
from .prediction import predicted_exponent
from .processes import (
    ChainSpec,
    ConfigurationError,
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
    SignedWeibull,
    TimeGrid,
    TwoSidedSpec,
    brownian,
)


def backend_name() -> str:
    """``"compiled"`` when the Cython core is in use, else ``"python"``."""
    return _backend.active_name()


__all__ = [
    "ChainSpec",
    "CompositionMode",
    "CompositionSpec",
    "ConfigurationError",
    "Constant",
    "CounterexampleSpec",
    "DenseRange",
    "ExactAtQueries",
    "ExperimentPlan",
    "ExponentFit",
    "FbmSpec",
    "Gaussian",
    "IbmSpec",
    "Laplace",
    "LevySpec",
    "PathSkeleton",
    "Rademacher",
    "RandomWalkSpec",
    "SignedWeibull",
    "SurvivalEstimate",
    "SurvivalJob",
    "TimeGrid",
    "TwoSidedSpec",
    "__version__",
    "backend_name",
    "brownian",
    "estimate_survival",
    "fit_exponent",
    "predicted_exponent",
    "run_experiment",
    "run_job",
    "wilson_interval",
]
