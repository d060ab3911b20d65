"""Named experiments with their tolerances and gates.

Each preset is a config dict in the :mod:`itersurv.config` layout, so a
preset run and an ``experiment --config`` run go through the same code.
The predicted exponent is never stored here; it comes from
:func:`itersurv.prediction.predicted_exponent` applied to the preset's
composition.

Gates:

``slope``
    pass iff ``|slope + theta_pred| <= tolerance``.
``oracle``
    pass iff every per-horizon Wilson interval contains the exact
    survival probability (the slope is reported, not gated).
``informative``
    the slope check is reported with a warning, the exit code is 0.

Presets with an oracle additionally require every interval to contain
the oracle value.
"""

from __future__ import annotations

import copy
import re
import sys
from collections.abc import Callable
from dataclasses import dataclass, field

from .config import plan_from_dict
from .estimation import ExperimentResult, run_experiment
from .oracles import bm_survival_closed_form, counterexample_survival_exact
from .processes import ConfigurationError

SLOPE, ORACLE, INFORMATIVE = "slope", "oracle", "informative"

_BM = {"kind": "brownian"}
_LEVY_OUTER = {
    "kind": "levy", "diffusion": 1.0, "jump_rate": 1.0,
    "jump_law": {"kind": "laplace", "mean": 0.5, "scale": 1.0}, "centered": True,
}
_RW_CENTERED = {"kind": "rw", "law": {"kind": "rademacher"}}
_RW_DRIFTED = {"kind": "rw", "law": {"kind": "gaussian", "mean": 0.3, "sd": 1.0}}


def _two_sided(branch: dict) -> dict:
    return {"kind": "two-sided", "plus": branch, "minus": branch}


@dataclass(frozen=True)
class Preset:
    name: str
    config: dict
    tolerance: float
    gate: str = SLOPE
    seed: int = 1
    summary: str = ""
    oracle: Callable[[float], float] | None = None
    warning: str | None = None

    def plan_dict(self, overrides: dict | None = None, seed: int | None = None,
                  budget_scale: float = 1.0) -> dict:
        d = copy.deepcopy(self.config)
        d.setdefault("experiment", {})["name"] = self.name
        d["experiment"].setdefault("seed", self.seed)
        if overrides:
            _merge(d, overrides)
        if seed is not None:
            d["experiment"]["seed"] = int(seed)
        if budget_scale != 1.0:
            _scale_budgets(d["grid"], budget_scale)
        return d

    def plan(self, overrides: dict | None = None, seed: int | None = None,
             budget_scale: float = 1.0):
        return plan_from_dict(self.plan_dict(overrides, seed, budget_scale))


def _merge(base: dict, over: dict):
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = copy.deepcopy(v)
    grid = over.get("grid", {})
    g = base.get("grid", {})
    # an explicit horizon list replaces a geometric grid and vice versa
    if "horizons" in grid:
        for k in ("t0", "ratio", "count"):
            if k not in grid:
                g.pop(k, None)
        if "budgets" not in grid and g.get("budgets") is not None \
                and len(g["budgets"]) != len(grid["horizons"]):
            g["budgets"] = [g["budgets"][-1]] * len(grid["horizons"])
    elif any(k in grid for k in ("t0", "ratio", "count")):
        g.pop("horizons", None)


def _scale_budgets(grid: dict, scale: float):
    if not scale > 0:
        raise ConfigurationError(f"budget scale must be positive, got {scale}")
    if grid.get("budgets") is not None:
        grid["budgets"] = [max(1, int(round(b * scale))) for b in grid["budgets"]]
    for k, default in (("n_min", 10_000), ("n_max", 2_000_000)):
        grid[k] = max(1, int(round(grid.get(k, default) * scale)))
    grid["c_budget"] = grid.get("c_budget", 2_000.0) * scale


def _composition(outer: dict, inner: dict, grid: dict, mode: str = "one-sided-abs",
                 strategy: dict | None = None, **experiment) -> dict:
    d = {"experiment": {"mode": mode, **experiment}, "grid": grid,
         "process": outer, "inner": inner}
    if strategy is not None:
        d["strategy"] = strategy
    return d


_STATIC: dict[str, Preset] = {}


def _add(p: Preset):
    _STATIC[p.name] = p


_add(Preset(
    "bm-baseline",
    {"experiment": {"step": 2.0**-6},
     "grid": {"t0": 256, "ratio": 2, "count": 7, "budgets": [200_000] * 7},
     "process": _BM},
    tolerance=0.05, oracle=lambda t: bm_survival_closed_form(t, 1.0).value,
    summary="Brownian motion alone: exponent 1/2 with exact per-horizon targets",
))
_add(Preset(
    "ibm-one-sided",
    _composition(_BM, _BM, {"t0": 1024, "ratio": 2, "count": 7, "n_min": 20_000,
                            "n_max": 400_000, "c_budget": 20_000},
                 strategy={"kind": "dense"}, inner_steps=1024),
    tolerance=0.05,
    summary="Brownian motion at the absolute value of an independent Brownian motion",
))
_add(Preset(
    "iterated-bm-two-sided",
    _composition(_two_sided(_BM), _BM, {"t0": 256, "ratio": 2, "count": 6, "n_min": 40_000,
                                        "n_max": 150_000, "c_budget": 2_000},
                 mode="two-sided", strategy={"kind": "dense"}, step=1.0),
    tolerance=0.07,
    summary="two-sided Brownian motion at Brownian times",
))
_add(Preset(
    "levy-rw-centered",
    _composition(_LEVY_OUTER, _RW_CENTERED, {"t0": 64, "ratio": 2, "count": 7,
                                             "n_min": 20_000, "n_max": 1_000_000,
                                             "c_budget": 20_000}),
    tolerance=0.05,
    summary="compensated Laplace-jump Levy process at centered random-walk times",
))
_add(Preset(
    "levy-rw-drift",
    _composition(_LEVY_OUTER, _RW_DRIFTED, {"t0": 64, "ratio": 2, "count": 7,
                                            "n_min": 20_000, "n_max": 1_000_000,
                                            "c_budget": 20_000}),
    tolerance=0.06,
    summary="compensated Laplace-jump Levy process at drifted random-walk times",
))
_add(Preset(
    "two-sided-levy-rw",
    _composition(_two_sided(_LEVY_OUTER), _RW_CENTERED,
                 {"t0": 64, "ratio": 2, "count": 7, "n_min": 20_000, "n_max": 600_000,
                  "c_budget": 20_000}, mode="two-sided"),
    tolerance=0.07,
    summary="two-sided Levy process at centered random-walk times",
))
_add(Preset(
    "two-sided-levy-rw-drift",
    _composition(_two_sided(_LEVY_OUTER), _RW_DRIFTED,
                 {"t0": 64, "ratio": 2, "count": 7, "n_min": 20_000, "n_max": 600_000,
                  "c_budget": 20_000}, mode="two-sided"),
    tolerance=0.07,
    summary="two-sided Levy process at drifted random-walk times",
))
_add(Preset(
    "levy-subordinator",
    _composition(
        {"kind": "levy", "diffusion": 1.0, "jump_rate": 1.0,
         "jump_law": {"kind": "laplace", "mean": 0.0, "scale": 1.0}},
        {"kind": "levy", "drift": 0.5, "diffusion": 0.0, "jump_rate": 1.0,
         "jump_law": {"kind": "constant", "value": 1.0}},
        {"t0": 32, "ratio": 2, "count": 6, "n_min": 20_000, "n_max": 300_000,
         "c_budget": 10_000}, step=1.0),
    tolerance=0.06,
    summary="symmetric Levy process at the times of an increasing Levy process",
))
_add(Preset(
    "fbm-one-sided-molchan",
    {"experiment": {"step": 0.125},
     "grid": {"t0": 16, "ratio": 2, "count": 7, "n_min": 20_000, "n_max": 400_000,
              "c_budget": 20_000},
     "process": {"kind": "fbm", "hurst": 0.75}},
    tolerance=0.10, gate=INFORMATIVE,
    warning="slow convergence with logarithmic corrections; informative only",
    summary="one-sided fBm (H = 3/4) alone: exponent 1 - H",
))
_add(Preset(
    "counterexample",
    {"grid": {"horizons": [1.5, 4.5, 10.5], "budgets": [100_000] * 3},
     "process": {"kind": "counterexample"}},
    tolerance=0.1, gate=ORACLE, seed=7,
    oracle=lambda t: counterexample_survival_exact(t).value,
    summary="spike process: survival 1/(floor(T + 1/2) + 1), checked exactly per horizon",
))


def _ibm_chain(n: int) -> Preset:
    return Preset(
        f"ibm-chain-{n}",
        _composition(_BM, {"kind": "chain", "depth": n},
                     {"t0": 1024, "ratio": 4, "count": 5, "n_min": 20_000, "n_max": 400_000,
                      "c_budget": 20_000},
                     strategy={"kind": "dense"}, inner_steps=1024),
        tolerance=0.05,
        summary=f"Brownian motion at a chain of {n} nested absolute Brownian motions",
    )


def _integrated(n: int) -> Preset:
    return Preset(
        f"integrated-inner-{n}",
        _composition(_BM, {"kind": "ibm", "order": n},
                     {"t0": 128, "ratio": 2, "count": 5, "n_min": 20_000, "n_max": 500_000,
                      "c_budget": 6_000},
                     strategy={"kind": "dense"}, inner_steps=1024),
        tolerance=0.08,
        summary=f"Brownian motion at the absolute value of {n}-times integrated Brownian motion",
    )


def _fbm_outer(h: float) -> Preset:
    return Preset(
        f"fbm-outer-{h:g}",
        _composition({"kind": "fbm", "hurst": h, "two_sided": True}, _BM,
                     {"t0": 128, "ratio": 2, "count": 5, "n_min": 40_000, "n_max": 120_000,
                      "c_budget": 3_000},
                     mode="two-sided", strategy={"kind": "dense", "fill_step": 0.05}, step=1.0),
        tolerance=0.07,
        summary=f"two-sided fBm (H = {h:g}) at Brownian times",
    )


_FAMILIES = (
    (re.compile(r"ibm-chain-(\d+)$"), lambda m: _ibm_chain(int(m.group(1)))),
    (re.compile(r"integrated-inner-(\d+)$"), lambda m: _integrated(int(m.group(1)))),
    (re.compile(r"fbm-outer-(0?\.\d+)$"), lambda m: _fbm_outer(float(m.group(1)))),
)

# instances listed by ``list-presets``; other family members resolve on demand
LISTED_FAMILY = ("ibm-chain-1", "ibm-chain-2", "integrated-inner-1", "integrated-inner-2",
                 "fbm-outer-0.25", "fbm-outer-0.75")


def preset_names() -> list[str]:
    names = list(_STATIC)
    names[3:3] = LISTED_FAMILY
    return names


def get_preset(name: str) -> Preset:
    if name in _STATIC:
        return _STATIC[name]
    for pattern, build in _FAMILIES:
        m = pattern.match(name)
        if m:
            try:
                return build(m)
            except ConfigurationError as exc:
                raise ConfigurationError(f"preset {name!r}: {exc}") from None
    raise UnknownPreset(name)


class UnknownPreset(ConfigurationError):
    def __init__(self, name: str):
        super().__init__(f"unknown preset {name!r}; available: {', '.join(preset_names())} "
                         "(families: ibm-chain-<n>, integrated-inner-<n>, fbm-outer-<H>)")
        self.name = name


@dataclass
class PresetOutcome:
    preset: Preset
    result: ExperimentResult
    tolerance: float
    slope_ok: bool | None
    oracle_ok: bool | None
    oracle_values: list[float] = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.preset.gate == INFORMATIVE:
            return True
        checks = [self.oracle_ok]
        if self.preset.gate == SLOPE:
            checks.append(self.slope_ok)
        return all(c is not False for c in checks) and any(c is not None for c in checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def lines(self) -> list[str]:
        fit = self.result.fit
        out = [f"preset {self.preset.name} (gate: {self.preset.gate})"]
        for j, e in enumerate(self.result.estimates):
            s = f"  T={e.horizon:g} p_hat={e.p_hat:.6g} ci=[{e.ci_low:.6g}, {e.ci_high:.6g}] " \
                f"n={e.n_samples}"
            if self.oracle_values:
                s += f" exact={self.oracle_values[j]:.6g}"
            out.append(s)
        if fit is None:
            out.append("  fit: fewer than two usable horizons")
        else:
            pred = "none" if fit.theta_pred is None else f"{-fit.theta_pred:g}"
            out.append(f"  slope={fit.slope:.4f} +/- {fit.slope_stderr:.4f} predicted={pred} "
                       f"({fit.theorem}) tolerance={self.tolerance:g}")
        if self.oracle_ok is not None:
            out.append(f"  oracle intervals: {'all contain exact values' if self.oracle_ok else 'MISMATCH'}")
        if self.preset.warning:
            out.append(f"  warning: {self.preset.warning}")
        out.append(f"  {'PASS' if self.passed else 'FAIL'}")
        return out


def run_scenario(name: str, overrides: dict | None = None, seed: int | None = None,
                 tolerance: float | None = None, budget_scale: float = 1.0, out_dir=None,
                 backend=None, nthreads: int | None = None) -> PresetOutcome:
    """Run a preset and apply its gate; files go to ``out_dir`` when given."""
    preset = get_preset(name)
    plan = preset.plan(overrides, seed, budget_scale)
    tol = preset.tolerance if tolerance is None else float(tolerance)
    res = run_experiment(plan, backend=backend, nthreads=nthreads, out_dir=out_dir,
                         manifest_extra={"preset": preset.name, "tolerance": tol,
                                         "gate": preset.gate})
    slope_ok = None
    if res.fit is not None and res.fit.theta_pred is not None:
        slope_ok = res.fit.deviation <= tol
    oracle_ok, values = None, []
    if preset.oracle is not None:
        values = [preset.oracle(e.horizon) for e in res.estimates]
        oracle_ok = all(e.contains(v) for e, v in zip(res.estimates, values))
    paths = {}
    if out_dir is not None:
        from pathlib import Path

        paths = {k: Path(out_dir) / f for k, f in
                 (("survival", "survival.csv"), ("fit", "fit.csv"), ("manifest", "manifest.json"))}
    if preset.warning:
        print(f"warning: {preset.name}: {preset.warning}", file=sys.stderr)
    return PresetOutcome(preset, res, tol, slope_ok, oracle_ok, values, paths)


run_preset = run_scenario
