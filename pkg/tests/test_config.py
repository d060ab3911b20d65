import json

import pytest

from itersurv.composition import CompositionMode, DenseRange
from itersurv.config import (
    DEFAULTS,
    parse_config,
    plan_from_dict,
    plan_to_dict,
    spec_from_dict,
    spec_to_dict,
)
from itersurv.presets import get_preset, preset_names
from itersurv.processes import (
    ConfigurationError,
    FbmSpec,
    Laplace,
    LevySpec,
    RandomWalkSpec,
    SignedWeibull,
    TwoSidedSpec,
    brownian,
)

MINIMAL = """
[grid]
t0 = 16
ratio = 2
count = 3

[process]
kind = "brownian"
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_gets_defaults(tmp_path):
    plan = parse_config(write(tmp_path, MINIMAL))
    ex = DEFAULTS["experiment"]
    assert plan.horizons == [16, 32, 64]
    assert plan.job.process == brownian()
    assert plan.job.barrier == ex["barrier"] and plan.job.seed == ex["seed"]
    assert plan.job.step == ex["step"] and plan.level == ex["level"]
    assert plan.k_min == ex["k_min"] and plan.name == ex["name"]
    assert plan.n_min == DEFAULTS["grid"]["n_min"] and plan.budgets is None


def test_negative_budget_names_field(tmp_path):
    text = MINIMAL.replace("count = 3", "count = 2\nbudgets = [100, -5]")
    with pytest.raises(ConfigurationError, match="grid.budgets"):
        parse_config(write(tmp_path, text))


def test_ratio_one_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="grid.ratio"):
        parse_config(write(tmp_path, MINIMAL.replace("ratio = 2", "ratio = 1")))


@pytest.mark.parametrize("edit, field", [
    (("count = 3", "count = 3\nbogus = 1"), "grid"),
    (('kind = "brownian"', 'kind = "cauchy"'), "process.kind"),
    (("t0 = 16", "t0 = 0.5"), "grid.t0"),
    (("[grid]", '[experiment]\nmode = "sideways"\n[grid]'), "experiment.mode"),
    (("[grid]", "[experiment]\nseed = -1\n[grid]"), "experiment.seed"),
])
def test_errors_name_the_field(tmp_path, edit, field):
    with pytest.raises(ConfigurationError, match=field.replace(".", r"\.")):
        parse_config(write(tmp_path, MINIMAL.replace(*edit)))


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ConfigurationError):
        parse_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigurationError, match="invalid TOML"):
        parse_config(write(tmp_path, "[grid\n"))


def test_composition_config(tmp_path):
    text = MINIMAL + """
[experiment]
mode = "two-sided"
inner_steps = 64

[inner]
kind = "brownian"

[strategy]
kind = "dense"
fill_step = 0.1
"""
    plan = parse_config(write(tmp_path, text))
    assert plan.job.mode is CompositionMode.TWO_SIDED
    assert plan.job.strategy == DenseRange(0.1) and plan.job.inner_steps == 64


@pytest.mark.parametrize("spec", [
    brownian(), RandomWalkSpec(), FbmSpec(0.3, True),
    LevySpec(diffusion=0.5, jump_rate=2.0, jump_law=Laplace(1.0, 0.5), centered=True),
    LevySpec(diffusion=0.0, jump_rate=1.0, jump_law=SignedWeibull(0.5, 0.8, 0.1)),
    TwoSidedSpec(brownian(), RandomWalkSpec()),
])
def test_spec_round_trip(spec):
    assert spec_from_dict(spec_to_dict(spec)) == spec


@pytest.mark.parametrize("name", preset_names())
def test_preset_plans_round_trip(name):
    plan = get_preset(name).plan()
    d = plan_to_dict(plan)
    assert plan_from_dict(json.loads(json.dumps(d))) == plan


def test_manifest_json_input(tmp_path):
    plan = get_preset("counterexample").plan()
    p = write(tmp_path, json.dumps({"config": plan_to_dict(plan)}), "manifest.json")
    assert parse_config(p) == plan
    with pytest.raises(ConfigurationError):
        parse_config(write(tmp_path, "{}", "other.json"))
