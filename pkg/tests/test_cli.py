import csv
import json
import math

import numpy as np
import pytest

from ouexchange.bench import emit_figures, run_benchmark, table_csv
from ouexchange.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from ouexchange.config import ConfigError, RunConfig, angle_label, load_config, parse_angle
from ouexchange.margrabe import margrabe_price
from ouexchange.model import ContractParams, ModelParams

FAST = ["--paths", "2000", "--fft-n", "1024"]


def test_empty_config_gives_benchmark_defaults():
    cfg = load_config()
    assert cfg.model == ModelParams(theta=cfg.model.theta)
    m = cfg.model
    assert m.aF == (1, 1) and m.bF == (5, 5) and m.lambdaF == (1, 1) and m.lambdaV == (1, 1)
    c = cfg.contract
    assert c.s0 == (100, 96) and c.c == c.m == 1 and c.q == (0, 0) and c.T == 1 and c.r == 0.04
    assert cfg.numeric.interval == (0, 5) and cfg.numeric.fft_n == 2 ** 12 and cfg.numeric.spline_knots == 2 ** 6
    assert cfg.methods == ("taylor1", "taylor2", "spline", "fft", "mc")
    assert cfg.theta_list == (math.pi / 6, math.pi / 3, math.pi / 2, math.pi)


def test_theta_override(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"theta_list": [1.0, 2.0]}))
    cfg = load_config(p, {"theta_list": ["0.5235987755982988"]})
    assert cfg.theta_list == (math.pi / 6,)


def test_named_angles():
    assert parse_angle("pi3") == math.pi / 3 and parse_angle("-pi") == -math.pi
    assert angle_label(math.pi / 2) == "pi2" and angle_label(0.25) == "0.25"
    with pytest.raises(ConfigError):
        parse_angle("tau")


@pytest.mark.parametrize("data,path", [
    ({"model": {"bF": [-5, 5]}}, "model.bF"),
    ({"model": {"bf": [5, 5]}}, "model.bf"),
    ({"contract": {"T": 0}}, "contract.T"),
    ({"numeric": {"fft_n": 1000}}, "numeric.fft_n"),
    ({"methods": ["fft", "bogus"]}, "methods[1]"),
    ({"mc": {"npaths": 50}}, "mc.npaths"),
    ({"mc": {"delta": 2.0}}, "mc.delta"),
    ({"extra": 1}, "extra"),
])
def test_invalid_configs_name_the_field(data, path):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict(data)
    assert e.value.path == path


def test_config_round_trip():
    cfg = load_config(None, {"theta_list": [0.3, "pi"], "methods": ["taylor", "fft"],
                             "numeric": {"vstar_override": 0.25, "interval": [0, 4]},
                             "mc": {"npaths": 5000, "delta": 0.004},
                             "model": {"V0": [0.1, 0.2]}})
    assert cfg.methods == ("taylor2", "fft")
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_price_command(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code = main(["price", "--theta", "pi6", "--method", "spline,fft", "--output", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    prices = {r["method"]: float(r["price"]) for r in rows}
    assert abs(prices["spline"] - 21.8969) <= 0.02
    assert abs(prices["fft"] - 21.8990) <= 0.02
    assert all(r["ci_low"] == "" for r in rows)


def test_price_requires_one_angle(capsys):
    assert main(["price", "--method", "fft"]) == EXIT_CONFIG


def test_config_errors_exit_one(tmp_path, capsys):
    assert main(["bench", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"bF": [-1, 5]}}')
    assert main(["bench", "--config", str(bad)]) == EXIT_CONFIG
    assert "model.bF" in capsys.readouterr().err
    assert main(["bench", "--interval", "1"]) == EXIT_CONFIG


def test_bench_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / "table.json"  # the path is part of the echoed config
        code = main(["bench", "--theta", "pi6,pi", "--method", "taylor1,fft,mc", "--format", "json",
                     "--output", str(out), *FAST])
        assert code == EXIT_OK
        outs.append(out.read_bytes())
        assert (out.parent / "table_timing.json").exists()
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert RunConfig.from_dict(doc["config"]).mc.npaths == 2000
    mc = [r for r in doc["rows"] if r["method"] == "mc"]
    assert all(r["ci_low"] <= r["price"] <= r["ci_high"] for r in mc)
    other = [r for r in doc["rows"] if r["method"] != "mc"]
    assert all(r["ci_low"] is None for r in other)


def test_failing_cell_is_isolated(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = main(["bench", "--theta", "pi6", "--method", "taylor1,spline,fft,mc",
                 "--interval", "0,0.01", "--output", str(out), *FAST])
    assert code == EXIT_PARTIAL
    rows = {r["method"]: r for r in csv.DictReader(out.open())}
    assert rows["fft"]["error"] and rows["spline"]["error"]
    assert rows["taylor1"]["price"] and rows["mc"]["price"]


def test_timing_and_speedups():
    cfg = load_config(None, {"theta_list": ["pi6"], "methods": ["fft", "mc"],
                             "mc": {"npaths": 2000}, "numeric": {"fft_n": 1024}})
    table = run_benchmark(cfg)
    assert set(table.timing()) == {"fft", "mc"} and set(table.speedups()) == {"fft"}
    assert table_csv(table).splitlines()[0] == "theta,theta_label,method,price,ci_low,ci_high,error"


def test_figure_datasets(tmp_path):
    cfg = load_config(None, {"theta_list": ["pi6"], "mc": {"npaths": 200, "emit_paths": 2}})
    files = emit_figures(cfg, tmp_path)
    names = {f.relative_to(tmp_path).as_posix() for f in files}
    assert {"margrabe_taylor.csv", "spline_error.csv", "density_pi6.csv"} <= names
    assert sum(n.startswith("trajectories/") for n in names) == 6

    v, c, t1, t2 = np.loadtxt(tmp_path / "margrabe_taylor.csv", delimiter=",", skiprows=1).T
    assert v.min() > 0 and v.max() == 1.0
    cp = ContractParams()
    i = int(np.argmin(np.abs(v - 0.25)))
    assert v[i] == pytest.approx(0.25, abs=1e-12)
    assert abs(t1[i] - float(margrabe_price(cp, 0.25))) < 1e-9
    assert abs(t2[i] - t1[i]) < 1e-12

    x, err = np.loadtxt(tmp_path / "spline_error.csv", delimiter=",", skiprows=1).T
    assert np.abs(err[x >= 0.05]).max() < 1e-3 * 20

    x, pdf = np.loadtxt(tmp_path / "density_pi6.csv", delimiter=",", skiprows=1).T
    assert x[np.argmax(pdf)] < 0.5
    mean = np.trapezoid(x * pdf, x) / np.trapezoid(pdf, x)
    var = np.trapezoid((x - mean) ** 2 * pdf, x) / np.trapezoid(pdf, x)
    assert np.trapezoid((x - mean) ** 3 * pdf, x) / np.trapezoid(pdf, x) / var ** 1.5 > 0


def test_figures_command(tmp_path, capsys):
    assert main(["figures", "--theta", "pi6", "--paths", "200", "--output", str(tmp_path / "f")]) == EXIT_OK
    assert (tmp_path / "f" / "margrabe_taylor.csv").exists()
    assert (tmp_path / "f" / "trajectories" / "correlation_path1.csv").exists()


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "ouexchange", "price", "--theta", "pi2", "--method", "taylor1"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[1].startswith(repr(math.pi / 2) + ",pi2,taylor1,")
