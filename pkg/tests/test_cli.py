import json
import os
import subprocess
import sys

import numpy as np
import pytest

from polaronlab.cli import main, parse_config, read_config_file, run_sweep
from polaronlab.errors import ConfigurationError, DomainError
from polaronlab.records import fit_exponent


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_constants(capsys):
    code, out = run(capsys, "constants")
    assert code == 0
    assert abs(out["I0_gamma"] - out["I0_quadrature"]) <= 1e-10
    assert out["I0_printed"] == 0.60868
    assert out["A"] == pytest.approx(0.025170587837, rel=1e-9)


def test_pekar_and_profile(capsys, tmp_path):
    code, out = run(capsys, "pekar", "--mass", "2", "--nodes", "512", "--out", str(tmp_path / "phi"))
    assert code == 0
    assert out["A"] == pytest.approx(0.0251705878, rel=1e-6)
    assert os.path.exists(out["files"]["profile"]) and os.path.exists(out["files"]["metadata"])


def test_tf(capsys):
    code, out = run(capsys, "tf", "--U", "0.3")
    assert code == 0
    assert out["e_U_over_1mU2"] == pytest.approx(-0.029916925955, rel=1e-6)


def test_budget_and_csv(capsys, tmp_path):
    path = tmp_path / "b.csv"
    code, out = run(capsys, "budget", "--n", "1e8", "--csv", str(path))
    assert code == 0
    assert out["exponents"]["relative_deficit"] == "-1/35"
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "in_n" and "r_xc" in header


def test_fermion_budget(capsys):
    code, out = run(capsys, "fermion-budget", "--N", "1e6")
    assert code == 0
    assert out["exponents"]["deficit"] == "25/11"


def test_probe_kernel(capsys):
    code, out = run(capsys, "probe-kernel")
    assert code == 0
    assert out["strictly_decreasing"]
    assert len(out["rows"]) == 3


def test_verify(capsys):
    code, out = run(capsys, "verify", "--seed", "1")
    assert code == 0 and out["passed"]


def test_error_json(capsys):
    # invalid inputs exit 2, numerical failures exit 1
    code, out = run(capsys, "tf", "--U", "1.5")
    assert code == 2
    assert out["error"]["type"] == "DomainError"
    code, out = run(capsys, "probe-kernel", "--cells", "16")
    assert code == 1 and out["error"]["type"] == "ResolutionError"
    code, out = run(capsys, "budget", "--eps-exp", "x/y")
    assert code == 2
    code, out = run(capsys, "no-such-command")
    assert code == 2 and out["error"]["type"] == "ConfigurationError"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "polaronlab", "budget", "--n", "1e6"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 1e6


# ---------------------------------------------------------------------------
# configuration


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# budget sweep\nmodule = budget\nn_min = 1e4   # lower end\nn_max = 1e8\n\nn_points = 3\n")
    assert read_config_file(path) == {"module": "budget", "n_min": 1e4, "n_max": 1e8, "n_points": 3}
    cfg = parse_config(path, ["n_points=5", "U_values=0.1,0.2"])
    assert cfg.n_points == 5 and cfg.U_values == (0.1, 0.2)


@pytest.mark.parametrize(
    "text",
    ["colour = red\n", "module = budget\nn_points\n", "n_points = three\n", "module = nope\n", "n_min = 1e9\nn_max = 1e8\n"],
)
def test_config_rejects(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigurationError):
        parse_config(path)


def test_config_error_exit_code(capsys, tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("colour = red\n")
    code, out = run(capsys, "sweep", "--config", str(path))
    assert code == 2 and "colour" in out["error"]["message"]


def test_env_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("POLARONLAB_OUTDIR", str(tmp_path / "env"))
    _, summary = run_sweep(parse_config(None, ["n_points=3"]))
    assert summary["files"]["csv"].startswith(str(tmp_path / "env"))
    _, summary = run_sweep(parse_config(None, ["n_points=3", f"outdir={tmp_path / 'flag'}"]))
    assert summary["files"]["csv"].startswith(str(tmp_path / "flag"))


@pytest.mark.parametrize("module", ["budget", "fermion-budget", "tf", "crossover"])
def test_sweep_deterministic(tmp_path, module):
    outs = []
    for k in range(2):
        cfg = parse_config(None, [f"module={module}", "n_points=4", "U_values=0.2,0.6", f"outdir={tmp_path / str(k)}"])
        _, summary = run_sweep(cfg)
        outs.append([open(summary["files"][key], "rb").read() for key in ("csv", "json")])
    assert outs[0] == outs[1]
    assert b"\r\n" not in outs[0][0]


def test_budget_sweep_fits(tmp_path):
    cfg = parse_config(None, ["n_points=5", f"outdir={tmp_path}"])
    records, summary = run_sweep(cfg)
    assert len(records) == 5
    assert summary["fits"]["r_main"]["slope"] == pytest.approx(17 / 15, abs=1e-10)
    assert summary["fits"]["trace_gamma"]["slope"] == pytest.approx(3 / 5, abs=1e-10)


def test_fermion_sweep_fits(tmp_path):
    cfg = parse_config(None, ["module=fermion-budget", "n_points=5", f"outdir={tmp_path}"])
    _, summary = run_sweep(cfg)
    assert summary["fits"]["main"]["slope"] == pytest.approx(25 / 11, abs=1e-10)
    assert summary["fits"]["xc"]["slope"] == pytest.approx(35 / 33, abs=1e-10)


# ---------------------------------------------------------------------------
# exponent fits


def test_fit_exact_power_law():
    x = np.geomspace(1e4, 1e12, 9)
    f = fit_exponent(x, 3.0 * x**1.4)
    assert f["slope"] == pytest.approx(1.4, abs=1e-12)
    assert f["stderr"] < 1e-12


def test_fit_noisy_power_law():
    rng = np.random.default_rng(5)
    x = np.geomspace(1e4, 1e12, 20)
    f = fit_exponent(x, x**1.4 * (1 + 0.01 * rng.normal(size=x.size)))
    assert abs(f["slope"] - 1.4) <= 3 * f["stderr"]


def test_fit_two_points_and_errors():
    f = fit_exponent([1e6, 1e8], [1e6**0.6, 1e8**0.6])
    assert f["slope"] == pytest.approx(0.6, abs=1e-12) and f["stderr"] is None
    for xs, ys in (([1.0], [1.0]), ([1.0, 2.0], [1.0, -1.0]), ([2.0, 2.0], [1.0, 3.0]), ([1.0, np.inf], [1.0, 2.0])):
        with pytest.raises(DomainError):
            fit_exponent(xs, ys)


def test_budget_sweep_relative_deficit_slope(tmp_path):
    # the r_int piece dominates only for a large interaction constant; with C_int = 1
    # the faster-decaying terms still bend the fit at these n
    _, summary = run_sweep(parse_config(None, ["C_int=1e14", f"outdir={tmp_path}"]))
    assert summary["fits"]["relative_deficit"]["slope"] == pytest.approx(-1 / 35, abs=1e-10)


def test_tf_sweep_constant_column(tmp_path):
    records, summary = run_sweep(parse_config(None, ["module=tf", f"outdir={tmp_path}"]))
    col = [r.outputs["e_U_over_1mU2"] for r in records]
    assert len(col) == 5
    assert max(col) - min(col) <= 1e-5 * abs(col[0])


def test_pekar_sweep_converges_monotonically(tmp_path):
    records, summary = run_sweep(parse_config(None, ["module=pekar", f"outdir={tmp_path}"]))
    errs = [r.outputs["relative_error"] for r in records]
    assert [r.inputs["nodes"] for r in records] == [256, 512, 1024]
    assert errs[0] > errs[1] > errs[2]
    assert summary["summary"]["monotone"]
