"""Experiment configuration: TOML files to plans and plans back to plain dicts.

A config has four tables::

    [experiment]          # seed, barrier, mode, step, inner_steps, bridge, level, k_min, name
    [grid]                # t0, ratio, count  or  horizons; budgets, n_min, n_max, c_budget
    [process]             # the baseline process or the outer process
    [inner]               # optional inner process (makes the run a composition)
    [strategy]            # optional: kind = "exact" | "dense", fill_step

Processes are tables with a ``kind`` key (``brownian``, ``levy``, ``rw``,
``ibm``, ``fbm``, ``counterexample``, ``chain``, ``two-sided``); laws use
``rademacher``, ``gaussian``, ``laplace``, ``weibull``, ``constant``.
Unknown keys are rejected.  The same dict layout is stored in run
manifests, so a manifest alone reproduces its run.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .composition import CompositionMode, DenseRange, ExactAtQueries
from .engine import DEFAULT_STEP, SurvivalJob
from .estimation import DEFAULT_K_MIN, DEFAULT_LEVEL, ExperimentPlan
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
    Rademacher,
    RandomWalkSpec,
    SignedWeibull,
    TwoSidedSpec,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS = {
    "experiment": {
        "name": "custom",
        "seed": 0,
        "barrier": 1.0,
        "mode": "one-sided-abs",
        "step": DEFAULT_STEP,
        "inner_steps": None,
        "bridge": None,
        "level": DEFAULT_LEVEL,
        "k_min": DEFAULT_K_MIN,
        "scenario": 0,
    },
    "grid": {
        "t0": None,
        "ratio": None,
        "count": None,
        "horizons": None,
        "budgets": None,
        "n_min": 10_000,
        "n_max": 2_000_000,
        "c_budget": 2_000.0,
    },
}

DEFAULTS_HELP = """\
config defaults:
  [experiment] seed=0 barrier=1.0 mode="one-sided-abs" step=2^-6 inner_steps=(from step)
               bridge=(auto) level=0.99 k_min=25
  [grid]       t0, ratio, count (or horizons) required; budgets=(auto)
               n_min=10000 n_max=2000000 c_budget=2000
  [strategy]   kind="dense" for continuous inner processes, "exact" otherwise;
               fill_step=(auto)
"""

_LAW_FIELDS = {
    "rademacher": (Rademacher, {}),
    "gaussian": (Gaussian, {"mean": 0.0, "sd": 1.0}),
    "laplace": (Laplace, {"mean": 0.0, "scale": 1.0}),
    "weibull": (SignedWeibull, {"shape": 0.5, "scale": 1.0, "offset": 0.0}),
    "constant": (Constant, {"value": 0.0}),
}


def _err(where: str, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{where}: {msg}")


def _check_keys(d: dict, allowed, where: str):
    if not isinstance(d, dict):
        raise _err(where, f"expected a table, got {type(d).__name__}")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise _err(where, f"unknown key(s) {extra}; allowed: {sorted(allowed)}")


def _num(d: dict, key: str, where: str, default=None, integer: bool = False):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(f"{where}.{key}", f"expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise _err(f"{where}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


# ---------------------------------------------------------------------------
# laws and processes


def law_from_dict(d: dict, where: str = "law"):
    if not isinstance(d, dict) or "kind" not in d:
        raise _err(where, "expected a table with a 'kind' key")
    kind = d["kind"]
    if kind not in _LAW_FIELDS:
        raise _err(f"{where}.kind", f"unknown law {kind!r}; choose from {sorted(_LAW_FIELDS)}")
    cls, fields = _LAW_FIELDS[kind]
    _check_keys(d, {"kind", *fields}, where)
    args = {k: _num(d, k, where, default) for k, default in fields.items()}
    return cls(**args)


def law_to_dict(law) -> dict:
    for kind, (cls, fields) in _LAW_FIELDS.items():
        if isinstance(law, cls):
            return {"kind": kind, **{k: getattr(law, k) for k in fields}}
    raise ConfigurationError(f"no dict form for law {law!r}")


def spec_from_dict(d: dict, where: str = "process"):
    if not isinstance(d, dict) or "kind" not in d:
        raise _err(where, "expected a table with a 'kind' key")
    kind = d["kind"]
    if kind == "brownian":
        _check_keys(d, {"kind", "sigma"}, where)
        return LevySpec(diffusion=_num(d, "sigma", where, 1.0))
    if kind == "levy":
        _check_keys(d, {"kind", "drift", "diffusion", "jump_rate", "jump_law", "centered"}, where)
        law = law_from_dict(d.get("jump_law", {"kind": "constant"}), f"{where}.jump_law")
        centered = d.get("centered", False)
        if not isinstance(centered, bool):
            raise _err(f"{where}.centered", f"expected true/false, got {centered!r}")
        return LevySpec(drift=_num(d, "drift", where, 0.0), diffusion=_num(d, "diffusion", where, 1.0),
                        jump_rate=_num(d, "jump_rate", where, 0.0), jump_law=law,
                        centered=centered)
    if kind == "rw":
        _check_keys(d, {"kind", "law"}, where)
        return RandomWalkSpec(law_from_dict(d.get("law", {"kind": "rademacher"}), f"{where}.law"))
    if kind == "ibm":
        _check_keys(d, {"kind", "order"}, where)
        return IbmSpec(_num(d, "order", where, 1, integer=True))
    if kind == "fbm":
        _check_keys(d, {"kind", "hurst", "two_sided"}, where)
        two = d.get("two_sided", False)
        if not isinstance(two, bool):
            raise _err(f"{where}.two_sided", f"expected true/false, got {two!r}")
        return FbmSpec(_num(d, "hurst", where, 0.5), two)
    if kind == "counterexample":
        _check_keys(d, {"kind"}, where)
        return CounterexampleSpec()
    if kind == "chain":
        _check_keys(d, {"kind", "depth"}, where)
        return ChainSpec(_num(d, "depth", where, 1, integer=True))
    if kind == "two-sided":
        _check_keys(d, {"kind", "plus", "minus"}, where)
        if "plus" not in d:
            raise _err(f"{where}.plus", "missing branch")
        plus = spec_from_dict(d["plus"], f"{where}.plus")
        minus = spec_from_dict(d.get("minus", d["plus"]), f"{where}.minus")
        return TwoSidedSpec(plus, minus)
    raise _err(f"{where}.kind", f"unknown process kind {kind!r}")


def spec_to_dict(spec) -> dict:
    if isinstance(spec, LevySpec):
        return {"kind": "levy", "drift": spec.drift, "diffusion": spec.diffusion,
                "jump_rate": spec.jump_rate, "jump_law": law_to_dict(spec.jump_law),
                "centered": spec.centered}
    if isinstance(spec, RandomWalkSpec):
        return {"kind": "rw", "law": law_to_dict(spec.law)}
    if isinstance(spec, IbmSpec):
        return {"kind": "ibm", "order": spec.order}
    if isinstance(spec, FbmSpec):
        return {"kind": "fbm", "hurst": spec.hurst, "two_sided": spec.two_sided}
    if isinstance(spec, CounterexampleSpec):
        return {"kind": "counterexample"}
    if isinstance(spec, ChainSpec):
        return {"kind": "chain", "depth": spec.depth}
    if isinstance(spec, TwoSidedSpec):
        return {"kind": "two-sided", "plus": spec_to_dict(spec.plus),
                "minus": spec_to_dict(spec.minus)}
    raise ConfigurationError(f"no dict form for {spec!r}")


# ---------------------------------------------------------------------------
# plans


def plan_from_dict(d: dict) -> ExperimentPlan:
    """Validated :class:`ExperimentPlan` from the config layout."""
    _check_keys(d, {"experiment", "grid", "process", "inner", "strategy"}, "config")
    for sec in ("grid", "process"):
        if sec not in d:
            raise _err(sec, "missing table")
    ex = dict(d.get("experiment", {}))
    _check_keys(ex, DEFAULTS["experiment"], "experiment")
    ex = {**DEFAULTS["experiment"], **ex}
    gr = dict(d["grid"])
    _check_keys(gr, DEFAULTS["grid"], "grid")
    gr = {**DEFAULTS["grid"], **gr}

    process = spec_from_dict(d["process"], "process")
    inner = spec_from_dict(d["inner"], "inner") if "inner" in d else None
    strategy = None
    if "strategy" in d:
        st = d["strategy"]
        _check_keys(st, {"kind", "fill_step"}, "strategy")
        kind = st.get("kind", "dense")
        if kind == "dense":
            strategy = DenseRange(_num(st, "fill_step", "strategy"))
        elif kind == "exact":
            if "fill_step" in st:
                raise _err("strategy.fill_step", "only meaningful with kind = 'dense'")
            strategy = ExactAtQueries()
        else:
            raise _err("strategy.kind", f"expected 'exact' or 'dense', got {kind!r}")
        if inner is None:
            raise _err("strategy", "a strategy needs an [inner] process")

    try:
        mode = CompositionMode(ex["mode"])
    except ValueError:
        raise _err("experiment.mode", f"expected one of {[m.value for m in CompositionMode]}, "
                   f"got {ex['mode']!r}") from None
    bridge = ex["bridge"]
    if bridge is not None and not isinstance(bridge, bool):
        raise _err("experiment.bridge", f"expected true/false, got {bridge!r}")
    seed = _num(ex, "seed", "experiment", integer=True)
    if seed < 0:
        raise _err("experiment.seed", f"must be nonnegative, got {seed}")
    step = _num(ex, "step", "experiment")
    if not step > 0:
        raise _err("experiment.step", f"must be positive, got {step}")
    inner_steps = _num(ex, "inner_steps", "experiment", integer=True)
    if inner_steps is not None and inner_steps < 1:
        raise _err("experiment.inner_steps", f"must be a positive integer, got {inner_steps}")
    name = ex["name"]
    if not isinstance(name, str):
        raise _err("experiment.name", f"expected a string, got {name!r}")

    horizons = gr["horizons"]
    if horizons is not None:
        if not isinstance(horizons, list) or len(horizons) < 2:
            raise _err("grid.horizons", "expected a list of at least two horizons")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise _err("grid.horizons", "horizons must increase")
        if any(k in d["grid"] for k in ("t0", "ratio", "count")):
            raise _err("grid", "give either horizons or t0/ratio/count, not both")
    else:
        for k in ("t0", "ratio", "count"):
            if gr[k] is None:
                raise _err(f"grid.{k}", "missing (or give horizons)")
        if _num(gr, "t0", "grid") < 1:
            raise _err("grid.t0", f"must be >= 1, got {gr['t0']}")
        if not _num(gr, "ratio", "grid") > 1:
            raise _err("grid.ratio", f"must be > 1 so the grid grows, got {gr['ratio']}")
        if _num(gr, "count", "grid", integer=True) < 2:
            raise _err("grid.count", f"must be >= 2, got {gr['count']}")
    budgets = gr["budgets"]
    if budgets is not None:
        if not isinstance(budgets, list):
            raise _err("grid.budgets", "expected a list of sample counts")
        for b in budgets:
            if isinstance(b, bool) or not isinstance(b, int) or b < 1:
                raise _err("grid.budgets", f"sample budgets must be positive integers, got {b!r}")
        budgets = tuple(budgets)
    for k in ("n_min", "n_max"):
        if _num(gr, k, "grid", integer=True) < 1:
            raise _err(f"grid.{k}", f"must be a positive integer, got {gr[k]}")
    if not _num(gr, "c_budget", "grid") > 0:
        raise _err("grid.c_budget", f"must be positive, got {gr['c_budget']}")

    first = float(horizons[0]) if horizons is not None else _num(gr, "t0", "grid")
    job = SurvivalJob(
        process, first, barrier=_num(ex, "barrier", "experiment"), inner=inner, mode=mode,
        strategy=strategy, step=step, inner_steps=inner_steps, bridge=bridge, seed=seed,
        scenario=_num(ex, "scenario", "experiment", integer=True),
    )
    grid_args = (
        {"grid": tuple(float(t) for t in horizons)} if horizons is not None
        else {"t0": _num(gr, "t0", "grid"), "ratio": _num(gr, "ratio", "grid"),
              "count": _num(gr, "count", "grid", integer=True)}
    )
    return ExperimentPlan(
        job, **grid_args, budgets=budgets, n_min=_num(gr, "n_min", "grid", integer=True),
        n_max=_num(gr, "n_max", "grid", integer=True), c_budget=_num(gr, "c_budget", "grid"),
        k_min=_num(ex, "k_min", "experiment", integer=True), level=_num(ex, "level", "experiment"),
        name=name,
    )


def plan_to_dict(plan: ExperimentPlan) -> dict:
    """Config layout of a plan; ``plan_from_dict(plan_to_dict(p))`` rebuilds ``p``."""
    job = plan.job
    ex = {"name": plan.name, "seed": job.seed, "barrier": job.barrier, "mode": job.mode.value,
          "step": job.step, "level": plan.level, "k_min": plan.k_min, "scenario": job.scenario}
    if job.inner_steps is not None:
        ex["inner_steps"] = job.inner_steps
    if job.bridge is not None:
        ex["bridge"] = job.bridge
    gr = {"n_min": plan.n_min, "n_max": plan.n_max, "c_budget": plan.c_budget}
    if plan.grid is not None:
        gr["horizons"] = list(plan.grid)
    else:
        gr.update(t0=plan.t0, ratio=plan.ratio, count=plan.count)
    if plan.budgets is not None:
        gr["budgets"] = list(plan.budgets)
    out = {"experiment": ex, "grid": gr, "process": spec_to_dict(job.process)}
    if job.inner is not None:
        out["inner"] = spec_to_dict(job.inner)
        st = job.strategy
        out["strategy"] = (
            {"kind": "dense", **({"fill_step": st.fill_step} if st.fill_step else {})}
            if isinstance(st, DenseRange) else {"kind": "exact"}
        )
    return out


def parse_config(path) -> ExperimentPlan:
    """Plan from a TOML config, or from the ``config`` entry of a JSON run manifest."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        if "config" not in data:
            raise ConfigurationError(f"{path}: JSON input must be a run manifest with 'config'")
        return plan_from_dict(data["config"])
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML ({exc})") from None
    return plan_from_dict(data)
