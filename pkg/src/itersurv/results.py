"""Result files: survival table and fit summary (CSV) plus a JSON run manifest.

CSV cells hold only results, so re-running a manifest reproduces them
byte for byte; timestamps and versions live in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from pathlib import Path

from . import __version__

SURVIVAL_HEADER = ("T", "p_hat", "ci_low", "ci_high", "n_samples", "n_survived")
FIT_HEADER = ("slope", "slope_stderr", "intercept", "r_squared", "theta_pred", "theorem")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row[h]) for h in header])
    return buf.getvalue()


def survival_csv(estimates) -> str:
    return csv_text(SURVIVAL_HEADER, [e.row() for e in estimates])


def fit_csv(fit) -> str:
    return csv_text(FIT_HEADER, [fit.row()] if fit is not None else [])


def digest(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def manifest_for(result, budgets, extra: dict | None = None) -> dict:
    from . import _backend
    from .config import plan_to_dict

    plan = result.plan
    config = plan_to_dict(plan)
    job = plan.job
    grids = {"step": job.step, "inner_steps": job.inner_steps}
    if job.inner is not None:
        grids["strategy"] = getattr(job.strategy, "name", str(job.strategy))
        grids["fill_step"] = job.fill_step()
    out = {
        "tool": "itersurv",
        "tool_version": __version__,
        "seed": job.seed,
        "config": config,
        "config_digest": digest(config),
        "horizons": plan.horizons,
        "budgets": list(budgets),
        "grid_parameters": grids,
        "prediction": {"theta": result.prediction.theta, "theorem": result.prediction.theorem,
                       "warnings": list(result.prediction.warnings)},
        "backend": _backend.active_name(),
        "seconds": round(result.seconds, 3),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    out["started_utc"] = time.strftime(
        "%Y-%m-%dT%H:%M:%SZ", time.gmtime(time.time() - result.seconds)
    )
    if extra:
        out.update(extra)
    return out


def write_experiment(result, out_dir, budgets, extra: dict | None = None) -> dict[str, Path]:
    """Write ``survival.csv``, ``fit.csv`` and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "survival": out / "survival.csv",
        "fit": out / "fit.csv",
        "manifest": out / "manifest.json",
    }
    paths["survival"].write_text(survival_csv(result.estimates))
    paths["fit"].write_text(fit_csv(result.fit))
    man = manifest_for(result, budgets, extra)
    paths["manifest"].write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return paths
