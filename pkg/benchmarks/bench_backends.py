"""Time the compiled kernels against the numpy fallback on representative jobs.

Usage::

    python benchmarks/bench_backends.py [--samples N] [--repeat R]

Both backends run the same samples of the same streams, so the survivor counts
printed next to the timings must agree.
"""

from __future__ import annotations

import argparse
import time

from itersurv import _backend
from itersurv.engine import SurvivalJob, run_job
from itersurv.processes import FbmSpec, IbmSpec, RandomWalkSpec, brownian


def jobs() -> dict[str, SurvivalJob]:
    return {
        "srw T=1024": SurvivalJob(RandomWalkSpec(), 1024.0, seed=1),
        "bm T=256 (bridge)": SurvivalJob(brownian(), 256.0, step=0.25, seed=1),
        "srw at srw T=256": SurvivalJob(RandomWalkSpec(), 256.0, inner=RandomWalkSpec(), seed=1),
        "bm at ibm T=64": SurvivalJob(brownian(), 64.0, inner=IbmSpec(1), inner_steps=256,
                                      seed=1),
        "fbm H=0.75 T=64": SurvivalJob(FbmSpec(0.75, False), 64.0, step=0.25, seed=1),
    }


def bench(job: SurvivalJob, backend: str, n: int, repeat: int) -> tuple[float, int]:
    best, count = float("inf"), 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        survived, _ = run_job(job, 0, n, backend=backend, nthreads=1)
        best = min(best, time.perf_counter() - t0)
        count = int(survived.sum())
    return best, count


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in _backend.available():
        print("compiled backend not built; only the numpy fallback is available")
    print(f"{'job':<22}{'backend':<10}{'seconds':>10}{'samples/s':>12}{'survived':>10}")
    for name, job in jobs().items():
        ref = None
        for backend in _backend.available():
            sec, count = bench(job, backend, args.samples, args.repeat)
            print(f"{name:<22}{backend:<10}{sec:>10.3f}{args.samples / sec:>12.0f}{count:>10}")
            if ref is None:
                ref = sec
            else:
                print(f"{'':<22}{'speedup':<10}{sec / ref:>10.1f}x")


if __name__ == "__main__":
    main()
