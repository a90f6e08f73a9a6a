import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from growvoi import __version__
from growvoi.cli import RunConfig, emit_plot_data, main, parse_args, render
from growvoi.errors import ConfigError
from growvoi.voi_analysis import voi_curve


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return meta, rows


def test_voi_sweep_example(capsys):
    code, out, _ = run_cli(capsys, "voi-sweep", "d=1.1", "f=1", "g=1", "h=0:0.25:50")
    assert code == 0
    meta, rows = parse_csv(out)
    assert list(rows[0]) == ["h", "sigma_star", "k_star", "voi", "pro_rata"]
    assert len(rows) == 201
    assert float(rows[-1]["h"]) == 50.0
    assert meta["classification"] == "MaxAtZero"
    assert meta["interior_min_h"] is not None
    assert meta["version"] == __version__ and meta["seed"] == 0
    assert meta["config"]["params"]["h"] == "0.0:0.25:50.0"


def test_region_example(capsys):
    code, out, _ = run_cli(capsys, "region", "g=1")
    assert code == 0
    doc = json.loads(out)
    assert doc["data"]["g"] == [1.0]
    assert doc["data"]["d_lower"] == [1.0]
    assert doc["data"]["d_upper"][0] == pytest.approx(1.2909944, abs=1e-7)
    assert doc["meta"]["config"]["subcommand"] == "region"


@pytest.mark.parametrize("argv,cols", [
    (["filter", "d=1.2", "T=5"], ["t", "sigma", "gain"]),
    (["filter", "d=1.2,1.0", "T=3"], ["t", "sigma_0", "gain_0", "sigma_1", "gain_1"]),
    (["steady", "d=1.1"], ["market", "sigma_star", "k_star", "voi", "pro_rata"]),
    (["simulate", "T=4", "paths=50", "mu0=2", "c=1"],
     ["t", "mean_price", "mean_profit", "se_profit", "mean_sq_belief_err", "sigma_t_predicted"]),
    (["bellman", "n_mu=12", "n_sigma=6", "delta=0.5"], ["mu", "sigma", "value", "policy_price"]),
    (["euler-limit"], ["h", "sigma_star", "euler_term", "limit", "rel_err"]),
])
def test_every_subcommand(capsys, argv, cols):
    code, out, _ = run_cli(capsys, *argv)
    assert code == 0
    meta, rows = parse_csv(out)
    assert list(rows[0]) == cols
    assert meta["config"]["subcommand"] == argv[0]


def test_json_format(capsys):
    code, out, _ = run_cli(capsys, "steady", "d=1.3", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and set(doc) == {"meta", "data"}
    assert doc["data"]["sigma_star"][0] > 0


def test_csv_numbers_round_trip(capsys):
    _, out, _ = run_cli(capsys, "voi-sweep", "d=1.3", "h=0:0.1:1")
    _, rows = parse_csv(out)
    c = voi_curve(1.3, 1.0, 1.0, np.arange(11) * 0.1)
    assert [float(r["voi"]) for r in rows] == c.voi.tolist()


def test_simulate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "seed=42", "T=6", "paths=300", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    meta, _ = parse_csv(a.read_text())
    assert meta["seed"] == 42 and "PCG64" in meta["rng"]
    main(["simulate", "seed=43", "T=6", "paths=300", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["voi-sweep", "d=1.1", "bogus=1"],
    ["voi-sweep", "d=abc"],
    ["voi-sweep", "h=5:1:0"],
    ["region", "g=0"],
    ["filter", "T=0"],
    ["filter", "d=1,1", "f=1,1,1"],
    ["bellman", "delta=1"],
    ["simulate", "paths=0"],
    ["simulate", "seed=-1"],
    ["steady", "method=magic"],
    ["filter", "notakeyvalue"],
])
def test_validation_errors_exit_2_and_write_nothing(tmp_path, capsys, argv):
    out = tmp_path / "o.csv"
    code, stdout, err = run_cli(capsys, *argv, "--out", str(out))
    assert code == 2
    assert "ConfigError" in err
    assert not out.exists() and stdout == ""
    assert list(tmp_path.iterdir()) == []


def test_numerical_failure_exits_3(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code, _, err = run_cli(capsys, "bellman", "n_mu=12", "n_sigma=6", "max_sweeps=2", "--out", str(out))
    assert code == 3
    assert "NoConvergence" in err
    assert not out.exists()


def test_plot_data(tmp_path, capsys):
    plot = tmp_path / "curve.dat"
    code, _, _ = run_cli(capsys, "voi-sweep", "d=1.1", "h=0:0.25:50", "--plot", str(plot))
    assert code == 0
    lines = plot.read_text().splitlines()
    assert "classification=MaxAtZero" in lines[0] and "interior_min_h=" in lines[0]
    data = np.loadtxt(plot)
    assert data.shape == (201, 2)


def test_plot_data_monotone_curve(tmp_path):
    c = voi_curve(1.0, 1.0, 1.0, np.linspace(0, 10, 41))
    path = emit_plot_data(c, tmp_path / "m.dat")
    head = path.read_text().splitlines()[0]
    assert "classification=MaxAtZero interior_min=none" in head
    assert np.all(np.diff(np.loadtxt(path)[:, 1]) < 0)


def test_plot_data_empty_curve(tmp_path):
    c = voi_curve(1.1, 1.0, 1.0, np.linspace(0, 1, 5))
    none = np.array([])
    empty = type(c)(**{**c.__dict__, "h_grid": none, "sigma_star": none, "k_star": none,
                       "voi": none, "pro_rata": none, "interior_min": None})
    with pytest.raises(ConfigError):
        emit_plot_data(empty, tmp_path / "e.dat")
    assert not (tmp_path / "e.dat").exists()


def test_plot_only_for_voi_sweep(capsys):
    code, _, _ = run_cli(capsys, "region", "--plot", "x.dat")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["voi-sweep", "d=1.3", "h=0:0.5:3"],
    ["simulate", "seed=7", "T=3", "paths=10", "d=1.1,1.2"],
    ["bellman", "n_mu=10", "n_sigma=4", "mu_lo=-3", "mu_hi=5"],
    ["region", "g=2", "--format", "csv"],
    ["euler-limit", "h=1,10", "--out", "e.csv"],
    ["voi-sweep", "--plot", "p.dat", "h=0,1,2"],
])
def test_config_echo_round_trip(argv):
    cfg = parse_args(argv)
    echo = json.loads(json.dumps(cfg.echo()))
    assert RunConfig.from_echo(echo, out=cfg.out, plot=cfg.plot) == cfg


def test_config_file_and_overrides(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[voi-sweep]\nd = 1.3\nh = 0:1:4\n\n[region]\ng = 2\n")
    code, out, _ = run_cli(capsys, "voi-sweep", "--config", str(ini))
    meta, rows = parse_csv(out)
    assert meta["config"]["params"]["d"] == "1.3" and len(rows) == 5
    code, out, _ = run_cli(capsys, "voi-sweep", "--config", str(ini), "d=1.05")
    meta, _ = parse_csv(out)
    assert meta["config"]["params"]["d"] == "1.05"


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[nonsense]\nx = 1\n")
    assert run_cli(capsys, "region", "--config", str(bad))[0] == 2
    assert run_cli(capsys, "region", "--config", str(tmp_path / "missing.ini"))[0] == 2
    bad.write_text("[region]\ng = 1\nextra = 2\n")
    assert run_cli(capsys, "region", "--config", str(bad))[0] == 2


def test_output_directory_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GROWVOI_OUTDIR", str(tmp_path / "outs"))
    assert main(["region", "--out", "r.json"]) == 0
    assert json.loads((tmp_path / "outs" / "r.json").read_text())["data"]["g"] == [1.0]
    absolute = tmp_path / "abs.json"
    assert main(["region", "--out", str(absolute)]) == 0
    assert absolute.exists()


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run_cli(capsys, "region", "--out", str(blocker / "sub" / "r.json"))
    assert code == 1 and "cannot write" in err


def test_render_does_not_write(tmp_path):
    cfg = parse_args(["region", "--out", str(tmp_path / "r.json")])
    outputs = render(cfg)
    assert list(outputs) == [tmp_path / "r.json"]
    assert not (tmp_path / "r.json").exists()


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "growvoi.cli", "region", "g=1"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["data"]["d_lower"] == [1.0]
