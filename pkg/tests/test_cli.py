import csv
import math
import subprocess
import sys

import pytest

from doco import cli, scenarios, theory
from doco.cli import ConfigError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def summary(path):
    return {k: v for k, v in read_csv(path)[1:]}


@pytest.fixture
def rods_ini(tmp_path):
    p = tmp_path / "rods.ini"
    p.write_text("[run]\nscenario = rods\nT = 200\n")
    return p


def test_minimal_config_defaults(rods_ini):
    cfg = cli.parse_config(rods_ini)
    assert cfg.algorithm == "doco" and cfg.alpha == "1/(2Lg)" and cfg.T == 200
    assert cfg.rods == scenarios.RodsConfig()


@pytest.mark.parametrize("spec, expected", [
    ("0.05", ("value", 0.05)), (0.05, ("value", 0.05)), ("1/(2Lg)", ("Lg", 0.5)),
    ("2/Lg", ("Lg", 2.0)), ("1/Lg", ("Lg", 1.0)), ("theoretical", ("theoretical", 1.0)),
    ("theoretical/4", ("theoretical", 0.25)),
])
def test_parse_alpha(spec, expected):
    kind, factor = cli.parse_alpha(spec)
    assert kind == expected[0] and factor == pytest.approx(expected[1])


@pytest.mark.parametrize("bad", ["banana", "-1", "0", "1/(0Lg)", "theoretical/0", ""])
def test_parse_alpha_rejects(bad):
    with pytest.raises(ConfigError):
        cli.parse_alpha(bad)


def test_resolve_alpha():
    assert cli.resolve_alpha("1/(2Lg)", 2.5, 0.1, 6, 0.5) == pytest.approx(0.2)
    ub = theory.stepsize_upper_bound(2.5, 0.1, 6, 0.5)
    assert cli.resolve_alpha("theoretical/2", 2.5, 0.1, 6, 0.5) == pytest.approx(ub / 2)


def test_unknown_keys_are_all_listed(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[run]\nscenario = rods\nfoo = 1\n[rods]\nbar = 2\n[extra]\n")
    with pytest.raises(ConfigError) as err:
        cli.parse_config(p, ["baz=3"])
    msg = str(err.value)
    for key in ("run.foo", "rods.bar", "[extra]", "baz"):
        assert key in msg


def test_overrides_and_seed(rods_ini):
    cfg = cli.parse_config(rods_ini, ["rods.R1=1.5", "alpha=0.1", "prediction=off"], seed=7)
    assert cfg.rods.R1 == 1.5 and cfg.alpha == "0.1" and cfg.seed == 7
    assert cfg.rods.seed == 7 and cfg.sinusoidal.seed == 7 and not cfg.sinusoidal.prediction
    with pytest.raises(ConfigError):
        cli.parse_config(rods_ini, ["T=abc"])
    with pytest.raises(ConfigError):
        cli.parse_config(None, ["T=3"])


def test_rods_run_outputs(rods_ini, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(rods_ini), "--out", str(out)]) == 0
    traj = read_csv(out / "trajectory.csv")
    assert traj[0][:5] == ["t", "true_R1", "est_R1", "true_R2", "est_R2"]
    assert len(traj) == 202
    s = summary(out / "summary.csv")
    assert s["scenario"] == "rods" and s["diverged"] == "0"
    L = float(s["L_g"])
    assert float(s["alpha"]) == pytest.approx(1 / (2 * L))
    assert float(s["path_length_final"]) < 1e-8 and float(s["grad_variation_final"]) > 0
    for k in ("c11", "c33", "K", "det_I_minus_Phi", "regret_bound_final"):
        assert k in s


def test_outputs_are_byte_identical(rods_ini, tmp_path):
    for name in ("a", "b"):
        cli.main(["run", "--config", str(rods_ini), "--out", str(tmp_path / name), "--set", "init=random"])
    for f in ("trajectory.csv", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_exit_codes(rods_ini, tmp_path, capsys):
    assert cli.main(["run", "--config", str(rods_ini), "--set", "alpha=banana", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(rods_ini), "--set", "nope=1", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(rods_ini), "--out", str(blocker / "sub")]) == 3
    assert "error" in capsys.readouterr().err


def test_odg_divergence_is_reported(tmp_path):
    out = tmp_path / "odg"
    code = cli.main(["run", "--set", "scenario=sinusoidal", "--set", "algorithm=odg",
                     "--set", "alpha=2/Lg", "--set", "T=2000", "--out", str(out)])
    assert code == 0
    s = summary(out / "summary.csv")
    assert s["diverged"] == "1" and int(s["steps"]) < 2000
    traj = read_csv(out / "trajectory.csv")
    assert traj[-1][-1] == "1" and all(r[-1] == "0" for r in traj[1:-1])
    assert math.isnan(float(s["regret_bound_final"]))


def test_sweep_matches_single_runs(rods_ini, tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(rods_ini), "--axis", "alpha", "--values", "0.1", "1/Lg",
                     "--jobs", "2", "--out", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0][0] == "axis_value"
    assert {r[0] for r in rows[1:]} == {"0.1", "1/Lg"}
    single = tmp_path / "single"
    cli.main(["run", "--config", str(rods_ini), "--set", "alpha=0.1", "--out", str(single)])
    body = [r[1:] for r in rows[1:] if r[0] == "0.1"]
    assert body == read_csv(single / "trajectory.csv")[1:]
    assert (out / "alpha=1_Lg" / "summary.csv").exists()


def test_sweep_scenario_axis(rods_ini, tmp_path):
    path = cli.sweep(cli.parse_config(rods_ini), "rods.R2", ["1.0", "3.0"], tmp_path, jobs=1)
    rows = read_csv(path)
    finals = {r[0]: r for r in rows[1:] if r[1] == "200"}
    assert float(finals["3.0"][4]) == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        cli.sweep(cli.parse_config(rods_ini), "rods.nope", ["1"], tmp_path)


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "doco", "run", "--set", "scenario=rods", "--set", "T=5",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "summary.csv").exists()
