"""Command line entry point: ``itersurv <subcommand> ...``.

Process and law arguments take either a bare kind (``brownian``) or an
inline JSON table in the config layout (``'{"kind": "fbm", "hurst": 0.75}'``).
``ITERSURV_THREADS`` caps the worker count of the compiled backend.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import DEFAULTS_HELP, law_from_dict, parse_config, spec_from_dict
from .processes import ConfigurationError


def _table(text: str, what: str) -> dict:
    text = text.strip()
    if text.startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"--{what}: invalid JSON ({exc})") from None
        return d
    return {"kind": text}


def _spec(text: str, what: str = "process"):
    return spec_from_dict(_table(text, what), what)


def _law(text: str):
    return law_from_dict(_table(text, "law"), "law")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_paths(args) -> int:
    import numpy as np

    from .composition import CompositionMode
    from .engine import SurvivalJob, inner_path, sample_streams
    from .generators import gen_path
    from .processes import RandomWalkSpec, TimeGrid
    from .rng import INNER, OUTER_MINUS, derive_stream

    spec = _spec(args.process)
    if args.count < 1:
        raise ConfigurationError(f"--count must be positive, got {args.count}")
    rows = []
    for i in range(args.sample, args.sample + args.count):
        if args.inner:
            job = SurvivalJob(spec, args.horizon, inner=_spec(args.inner, "inner"),
                              mode=CompositionMode(args.mode), step=args.step, seed=args.seed)
            path = inner_path(job, sample_streams(job, i)[0])
        else:
            if isinstance(spec, RandomWalkSpec):
                grid = TimeGrid(1.0, max(1, int(args.horizon)))
            else:
                grid = TimeGrid.over(args.horizon, args.step)
            path = gen_path(spec, grid, derive_stream(args.seed, (0, 0, i, INNER)),
                            derive_stream(args.seed, (0, 0, i, OUTER_MINUS)))
        times, values = path.grid.times(), path.values
        if path.minus is not None:
            times = np.concatenate([-times[:0:-1], times])
            values = np.concatenate([path.minus[:0:-1], values])
        rows.extend((i, t, v) for t, v in zip(times, values))
    lines = ["sample,time,value" if args.count > 1 else "time,value"]
    for i, t, v in rows:
        cells = ([str(i)] if args.count > 1 else []) + [repr(float(t)), repr(float(v))]
        lines.append(",".join(cells))
    _write("\n".join(lines) + "\n", args.out)
    return 0


def _job_from_args(args):
    from .composition import CompositionMode, DenseRange, ExactAtQueries
    from .engine import SurvivalJob

    if args.config:
        plan = parse_config(args.config)
        from dataclasses import replace

        job = replace(plan.job, horizon=args.horizon)
        if args.seed is not None:
            job = replace(job, seed=args.seed)
        return job, plan.level
    if not args.process:
        raise ConfigurationError("give --config or --process")
    strategy = None
    if args.strategy == "exact":
        strategy = ExactAtQueries()
    elif args.strategy == "dense":
        strategy = DenseRange(args.fill_step)
    return SurvivalJob(
        _spec(args.process), args.horizon, barrier=args.barrier,
        inner=_spec(args.inner, "inner") if args.inner else None,
        mode=CompositionMode(args.mode), strategy=strategy, step=args.step,
        inner_steps=args.inner_steps, seed=args.seed or 0,
    ), args.level


def cmd_survival(args) -> int:
    from .estimation import estimate_survival
    from .results import survival_csv

    job, level = _job_from_args(args)
    est = estimate_survival(job, args.samples, level, backend=args.backend)
    _write(survival_csv([est]), args.out)
    return 0


def cmd_fit(args) -> int:
    from .estimation import SurvivalEstimate, fit_exponent
    from .prediction import predicted_exponent
    from .results import fit_csv

    with open(args.input, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigurationError(f"{args.input}: no survival rows")
    missing = {"T", "n_samples", "n_survived"} - set(rows[0])
    if missing:
        raise ConfigurationError(f"{args.input}: missing column(s) {sorted(missing)}")
    ests = [SurvivalEstimate(float(r["T"]), 1.0, int(r["n_samples"]), int(r["n_survived"]))
            for r in rows]
    fit = fit_exponent(ests, args.k_min)
    if args.config:
        pred = predicted_exponent(parse_config(args.config).job)
        fit = fit.with_prediction(pred.theta, pred.theorem)
    _write(fit_csv(fit), args.out)
    if fit.excluded:
        print(f"excluded horizons (fewer than {args.k_min} survivors): "
              f"{', '.join(f'{t:g}' for t in fit.excluded)}", file=sys.stderr)
    return 0


def cmd_probe(args) -> int:
    from .fluctuation import (
        ladder_height_tail_probe,
        negative_moment_estimate,
        normalized_barrier_check,
        small_deviation_curve,
    )
    from .results import csv_text

    kind = args.kind
    if kind == "smalldev":
        pts = small_deviation_curve(_spec(args.process), _floats(args.eps), args.samples,
                                    args.seed, backend=args.backend)
        rows = [{"eps": p.level, "p_hat": p.p_hat, "ci_low": p.interval[0],
                 "ci_high": p.interval[1], "n_samples": p.n_samples, "n_hits": p.n_hits}
                for p in pts]
        text = csv_text(("eps", "p_hat", "ci_low", "ci_high", "n_samples", "n_hits"), rows)
    elif kind == "negmoment":
        rows = []
        for eta in _floats(args.eta):
            m = negative_moment_estimate(_spec(args.process), eta, args.samples, args.seed,
                                         backend=args.backend)
            rows.append({"eta": m.eta, "mean": m.mean, "stderr": m.stderr,
                         "n_samples": m.n_samples, "top_share": m.top_share,
                         "heavy_tail": int(m.heavy_tail)})
        text = csv_text(("eta", "mean", "stderr", "n_samples", "top_share", "heavy_tail"), rows)
    elif kind == "barrier-ratio":
        r = normalized_barrier_check(_law(args.law), args.n_steps, args.exponent, args.samples,
                                     args.seed, backend=args.backend)
        lo, hi = r.interval
        text = csv_text(("n_steps", "exponent", "ratio", "ci_low", "ci_high", "target",
                         "relative_error", "n_samples", "n_hits"),
                        [{"n_steps": r.n_steps, "exponent": r.exponent, "ratio": r.ratio,
                          "ci_low": lo, "ci_high": hi, "target": r.target,
                          "relative_error": r.relative_error,
                          "n_samples": r.estimate.n_samples, "n_hits": r.estimate.n_hits}])
    else:
        t = ladder_height_tail_probe(_law(args.law), args.samples, args.seed,
                                     thresholds=_floats(args.thresholds), backend=args.backend)
        rows = [{"x": float(x), "tail": float(p), "n_used": t.n_used, "n_flagged": t.n_flagged}
                for x, p in zip(t.thresholds, t.tail)]
        text = csv_text(("x", "tail", "n_used", "n_flagged"), rows)
    _write(text, args.out)
    return 0


def cmd_oracle(args) -> int:
    from . import oracles

    w = args.which
    if w == "srw-max":
        r = oracles.srw_max_dp(args.n, args.barrier)
    elif w == "srw-iter":
        r = oracles.srw_iterated_enum(args.n, args.barrier)
    elif w == "bm-smalldev":
        r = oracles.bm_small_dev_exact(args.eps)
    elif w == "counterexample":
        r = oracles.counterexample_survival_exact(args.t)
    else:
        r = oracles.bm_survival_closed_form(args.t, args.x)
    exact = f" ({r.exact})" if r.exact is not None and r.exact.denominator != 1 else ""
    print(f"{r.value!r} {r.method}{exact}")
    return 0


def _report_experiment(res, out_dir) -> None:
    for e in res.estimates:
        print(f"T={e.horizon:g} p_hat={e.p_hat:.6g} ci=[{e.ci_low:.6g}, {e.ci_high:.6g}] "
              f"n={e.n_samples}")
    fit = res.fit
    if fit is None:
        print("fit: fewer than two usable horizons")
    else:
        pred = "none" if fit.theta_pred is None else f"{-fit.theta_pred:g}"
        print(f"slope={fit.slope:.4f} +/- {fit.slope_stderr:.4f} predicted={pred} ({fit.theorem})")
    for w in res.prediction.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if out_dir:
        print(f"results written to {out_dir}")


def cmd_experiment(args) -> int:
    from dataclasses import replace

    from .estimation import run_experiment

    plan = parse_config(args.config)
    if args.seed is not None:
        plan = replace(plan, job=replace(plan.job, seed=args.seed))
    res = run_experiment(plan, backend=args.backend, out_dir=args.out)
    _report_experiment(res, args.out)
    if args.tolerance is not None:
        return 0 if res.deviation is not None and res.deviation <= args.tolerance else 1
    return 0


def cmd_preset(args) -> int:
    from .presets import run_scenario

    overrides = {}
    if args.horizons:
        overrides["grid"] = {"horizons": _floats(args.horizons)}
    out = run_scenario(args.name, overrides or None, seed=args.seed, tolerance=args.tolerance,
                       budget_scale=args.budget_scale, out_dir=args.out, backend=args.backend)
    print("\n".join(out.lines()))
    if args.out:
        print(f"results written to {args.out}")
    return out.exit_code


def cmd_list_presets(args) -> int:
    from .prediction import predicted_exponent
    from .presets import get_preset, preset_names

    for name in preset_names():
        p = get_preset(name)
        pred = predicted_exponent(p.plan().job)
        theta = "-" if pred.theta is None else f"{pred.theta:g}"
        print(f"{name:26s} theta={theta:6s} tol={p.tolerance:<5g} gate={p.gate:12s} {p.summary}")
    print("families: ibm-chain-<n>, integrated-inner-<n>, fbm-outer-<H>")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_validation

    report = run_validation(quick=args.quick, backend=args.backend)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# parser


def _survival_args(p):
    p.add_argument("--config", help="TOML config (process, inner, mode, step ... taken from it)")
    p.add_argument("--process", help="process kind or JSON table")
    p.add_argument("--inner", help="inner process kind or JSON table (makes a composition)")
    p.add_argument("--mode", default="one-sided-abs", choices=["one-sided-abs", "two-sided"])
    p.add_argument("--strategy", choices=["exact", "dense"], help="range strategy (default by inner type)")
    p.add_argument("--fill-step", type=float, default=None, help="dense fill step (default automatic)")
    p.add_argument("--step", type=float, default=2.0**-6, help="grid step (default 2^-6)")
    p.add_argument("--inner-steps", type=int, default=None, help="fixed inner step count")
    p.add_argument("--barrier", type=float, default=1.0)
    p.add_argument("--level", type=float, default=0.99, help="Wilson interval level (default 0.99)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="itersurv",
        description="Survival probabilities and survival exponents of iterated processes.",
        epilog=DEFAULTS_HELP + "\nenvironment:\n  ITERSURV_THREADS   cap on worker threads "
               "(default: all cores)\n  ITERSURV_BACKEND   auto | compiled | python",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("--version", action="version", version=f"itersurv {__version__}")
    ap.add_argument("--backend", choices=["auto", "compiled", "python"], default=None,
                    help="sampling backend (default: compiled when built)")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("paths", help="dump sampled paths as CSV time,value")
    p.add_argument("--process", required=True, help="process kind or JSON table")
    p.add_argument("--inner", help="dump the inner path of this composition instead")
    p.add_argument("--mode", default="one-sided-abs", choices=["one-sided-abs", "two-sided"])
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--step", type=float, default=2.0**-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample", type=int, default=0, help="first sample index")
    p.add_argument("--count", type=int, default=1, help="number of paths (adds a sample column)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("survival", help="estimate P(sup Z <= barrier) at one horizon")
    _survival_args(p)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("fit", help="fit the survival exponent to a survival CSV")
    p.add_argument("--input", required=True, help="CSV with columns T,n_samples,n_survived")
    p.add_argument("--k-min", type=int, default=25, help="minimum survivors per point (default 25)")
    p.add_argument("--config", help="config whose composition supplies theta_pred")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("probe", help="fluctuation probes, CSV output")
    p.add_argument("--kind", required=True,
                   choices=["smalldev", "negmoment", "barrier-ratio", "ladder-tail"])
    p.add_argument("--process", default="brownian", help="probed process (smalldev, negmoment)")
    p.add_argument("--law", default="rademacher", help="increment law (barrier-ratio, ladder-tail)")
    p.add_argument("--eps", default="0.5,0.75,1.0", help="comma-separated small-deviation levels")
    p.add_argument("--eta", default="0.5", help="comma-separated moment orders")
    p.add_argument("--n-steps", type=int, default=10**6)
    p.add_argument("--exponent", type=float, default=0.4)
    p.add_argument("--thresholds", default="1,2,3,4,5")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("oracle", help="exact reference values")
    osub = p.add_subparsers(dest="which", required=True, metavar="oracle")
    o = osub.add_parser("srw-max", help="P(max_{k<=n} S_k <= barrier), simple random walk")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--barrier", type=int, default=0)
    o = osub.add_parser("srw-iter", help="iterated simple random walks, n <= 12")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--barrier", type=int, default=0)
    o = osub.add_parser("bm-smalldev", help="P(sup_[0,1] |B| <= eps)")
    o.add_argument("--eps", type=float, required=True)
    o = osub.add_parser("counterexample", help="survival of the spike process up to T")
    o.add_argument("--t", type=float, required=True)
    o = osub.add_parser("bm-survival", help="P(sup_[0,T] B <= x)")
    o.add_argument("--t", type=float, required=True)
    o.add_argument("--x", type=float, default=1.0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="run a config: estimates, fit, manifest",
                       epilog=DEFAULTS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True, help="TOML config or JSON run manifest")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", help="directory for survival.csv, fit.csv, manifest.json")
    p.add_argument("--tolerance", type=float, default=None,
                   help="exit 1 unless |slope + theta_pred| <= tolerance")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("preset", help="run a named experiment; exit 0 iff within tolerance")
    p.add_argument("name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--budget-scale", type=float, default=1.0, help="multiply all sample budgets")
    p.add_argument("--horizons", help="comma-separated horizons replacing the preset grid")
    p.add_argument("--out", help="directory for survival.csv, fit.csv, manifest.json")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="sample sizes capped at 10^4")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("list-presets", help="list preset experiments")
    p.set_defaults(func=cmd_list_presets)
    return ap


def main(argv=None) -> int:
    from .presets import UnknownPreset

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownPreset as exc:
        print(f"error: {exc}", file=sys.stderr)
        from .presets import preset_names

        print("presets:", file=sys.stderr)
        for n in preset_names():
            print(f"  {n}", file=sys.stderr)
        return 2
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
