import csv
import io
import json

import pytest

from itersurv.cli import main
from itersurv.presets import preset_names


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_paths_csv(capsys):
    code, out, _ = run(capsys, "paths", "--process", "brownian", "--horizon", "1", "--step", "0.25")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "time,value" and len(lines) == 6
    assert lines[1] == "0.0,0.0"


def test_paths_multiple_two_sided(capsys):
    code, out, _ = run(capsys, "paths", "--process", '{"kind": "fbm", "hurst": 0.7, "two_sided": true}',
                       "--horizon", "1", "--step", "0.5", "--count", "2")
    r = rows(out)
    assert code == 0 and set(r[0]) == {"sample", "time", "value"}
    assert {x["sample"] for x in r} == {"0", "1"}
    assert any(float(x["time"]) < 0 for x in r)


def test_survival_and_fit_round_trip(capsys, tmp_path):
    table = tmp_path / "s.csv"
    with open(table, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["T", "n_samples", "n_survived"])
        for t in (16, 64, 256):
            w.writerow([t, 10**6, int(10**6 * t**-0.5)])
    code, out, _ = run(capsys, "fit", "--input", str(table))
    assert code == 0 and abs(float(rows(out)[0]["slope"]) + 0.5) < 1e-3

    code, out, _ = run(capsys, "survival", "--process", "rw", "--horizon", "16",
                       "--barrier", "0", "--samples", "20000", "--seed", "1")
    r = rows(out)[0]
    assert code == 0 and float(r["ci_low"]) <= 0.196381 <= float(r["ci_high"])


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "srw-max", "--n", "4", "--barrier", "0")
    assert code == 0 and out.split()[0] == "0.375" and "3/8" in out
    code, out, _ = run(capsys, "oracle", "counterexample", "--t", "10.5")
    assert code == 0 and "1/12" in out


def test_probe(capsys):
    code, out, _ = run(capsys, "probe", "--kind", "ladder-tail", "--law", "rademacher",
                       "--samples", "1000", "--thresholds", "1,2")
    assert code == 0 and [float(r["tail"]) for r in rows(out)] == [0.0, 0.0]


def test_experiment_writes_manifest_that_reproduces(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[grid]\nhorizons = [1.5, 4.5, 10.5]\nbudgets = [2000, 2000, 2000]\n'
                   '[process]\nkind = "counterexample"\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "experiment", "--config", str(cfg), "--out", str(a))[0] == 0
    assert run(capsys, "experiment", "--config", str(a / "manifest.json"), "--out", str(b))[0] == 0
    for name in ("survival.csv", "fit.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["seed"] == 0 and man["horizons"] == [1.5, 4.5, 10.5]


def test_preset_counterexample_exit_zero(capsys, tmp_path):
    code, out, _ = run(capsys, "preset", "counterexample", "--seed", "7", "--budget-scale", "0.2",
                       "--out", str(tmp_path))
    assert code == 0 and "PASS" in out
    assert (tmp_path / "survival.csv").exists()


def test_unknown_preset(capsys):
    code, _, err = run(capsys, "preset", "no-such-thing")
    assert code != 0
    for name in preset_names():
        assert name in err


def test_list_presets(capsys):
    code, out, _ = run(capsys, "list-presets")
    assert code == 0 and all(n in out for n in preset_names())


@pytest.mark.parametrize("argv", [
    ["survival", "--process", "cauchy", "--horizon", "1"],
    ["experiment", "--config", "/nonexistent.toml"],
    ["fit", "--input", "/nonexistent.csv"],
])
def test_errors_exit_nonzero(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")
