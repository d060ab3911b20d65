import time

from itersurv.cli import main
from itersurv.validate import (
    INVARIANTS,
    QUICK_CAP,
    Context,
    mutant_running_extrema,
    run_validation,
)

MODULES = {"core-rng", "generators", "composition", "fluctuation-stats", "estimation", "oracles",
           "cli-runner"}


def test_every_module_has_invariants():
    assert {m for m, _, _ in INVARIANTS} == MODULES
    keys = [f"{m}/{n}" for m, n, _ in INVARIANTS]
    assert len(keys) == len(set(keys))


def test_quick_run_passes_fast():
    t0 = time.perf_counter()
    report = run_validation(quick=True)
    elapsed = time.perf_counter() - t0
    assert report.passed, "\n".join(report.lines())
    assert elapsed < 60
    assert report.names() == [f"{m}/{n}" for m, n, _ in INVARIANTS]


def test_quick_and_full_share_the_invariant_list():
    cheap = ["oracles/dp", "running-extrema", "ladder-heights"]
    quick = run_validation(quick=True, only=cheap)
    full = run_validation(quick=False, only=cheap)
    assert quick.names() == full.names() and quick.passed and full.passed
    assert Context(True).n(10**6) == QUICK_CAP < Context(False).n(10**6)


def test_off_by_one_running_extrema_is_caught():
    report = run_validation(quick=True, only=["ladder-heights"],
                            running_extrema=mutant_running_extrema)
    failed = [c.name for c in report.checks if not c.passed]
    assert "ladder-heights-reconstruct-maxima" in failed


def test_cli_validate_exit_code(capsys):
    assert main(["validate", "--quick"]) == 0
    out = capsys.readouterr().out
    assert f"{len(INVARIANTS)}/{len(INVARIANTS)} invariants passed" in out
