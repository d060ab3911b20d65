import pytest

from itersurv.oracles import counterexample_survival_exact
from itersurv.prediction import predicted_exponent
from itersurv.presets import (
    INFORMATIVE,
    ORACLE,
    UnknownPreset,
    get_preset,
    preset_names,
    run_scenario,
)
from itersurv.processes import ChainSpec, ConfigurationError, FbmSpec, IbmSpec


def test_every_listed_preset_builds_a_plan_with_a_prediction():
    for name in preset_names():
        plan = get_preset(name).plan()
        assert predicted_exponent(plan.job).available, name
        assert plan.name == name


def test_family_members_resolve_on_demand():
    assert get_preset("ibm-chain-3").plan().job.inner == ChainSpec(3)
    assert get_preset("integrated-inner-2").plan().job.inner == IbmSpec(2)
    assert get_preset("fbm-outer-0.6").plan().job.process == FbmSpec(0.6, True)
    with pytest.raises(ConfigurationError):
        get_preset("fbm-outer-1.5")


def test_unknown_preset_lists_available():
    with pytest.raises(UnknownPreset) as err:
        get_preset("nope")
    assert all(n in str(err.value) for n in preset_names())


def test_horizon_override_replaces_grid_and_resizes_budgets():
    plan = get_preset("bm-baseline").plan({"grid": {"horizons": [16, 64]}})
    assert plan.horizons == [16, 64] and plan.sample_budgets() == [200_000, 200_000]


def test_seed_and_budget_scale():
    plan = get_preset("levy-rw-centered").plan(seed=9, budget_scale=0.1)
    base = get_preset("levy-rw-centered").plan()
    assert plan.job.seed == 9
    assert plan.n_max == base.n_max // 10 and plan.c_budget == pytest.approx(base.c_budget / 10)
    with pytest.raises(ConfigurationError):
        get_preset("levy-rw-centered").plan(budget_scale=0.0)


def test_gates():
    assert get_preset("counterexample").gate == ORACLE
    assert get_preset("fbm-one-sided-molchan").gate == INFORMATIVE
    assert get_preset("bm-baseline").oracle is not None


def test_counterexample_scenario(tmp_path):
    out = run_scenario("counterexample", {"grid": {"horizons": [1.5, 4.5, 10.5]}}, seed=7,
                       out_dir=tmp_path)
    assert out.passed and out.exit_code == 0 and out.oracle_ok
    assert out.oracle_values == [counterexample_survival_exact(t).value for t in (1.5, 4.5, 10.5)]
    assert out.paths["manifest"].exists()
    assert out.lines()[-1].strip() == "PASS"


def test_slope_gate_fails_with_zero_tolerance():
    out = run_scenario("levy-rw-centered", {"grid": {"horizons": [16, 64]}}, tolerance=0.0,
                       budget_scale=0.05)
    assert out.slope_ok is False and out.exit_code == 1
