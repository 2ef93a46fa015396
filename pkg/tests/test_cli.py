import json
import os
import subprocess
import sys

import numpy as np
import pytest

from surfspin import __version__
from surfspin.cli import main


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SURFSPIN_CONFIG_PATH", raising=False)


def _json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    cwd = os.getcwd()
    os.chdir(d)
    try:
        assert main(["simulate", "--scenario", "three-peak", "--seed", "7", "-o", "out.csv"]) == 0
        assert main(["fit-sweep", "out.csv"]) == 0
        assert main(["spin-density", "--from-fit", "out.fit-sweep.json", "-o", "dens.json"]) == 0
    finally:
        os.chdir(cwd)
    return d


def test_simulate_fit_sweep_round_trip(pipeline):
    man = _json(pipeline / "out.manifest.json")["manifest"]
    fit = _json(pipeline / "out.fit-sweep.json")
    assert fit["tool"] == "surfspin" and fit["version"] == __version__
    assert len(fit["config_hash"]) == 16
    assert fit["fit"]["converged"]
    for lab, d in man["resolved"].items():
        for k, v in d.items():
            if v > 0:
                lo, hi = fit["fit"]["ci95"][f"{lab}.{k}"]
                assert lo <= v <= hi, f"{lab}.{k}"
    assert (pipeline / "out.decomposition.csv").exists()


def test_spin_density_order_of_magnitude(pipeline):
    d = _json(pipeline / "dens.json")
    assert 1e17 <= d["n_per_m2"] < 1e18
    assert d["dn_ddelta_per_m3"] > 0
    assert set(d["n_breakdown"]) == {"central", "satlow", "sathigh"}


def test_report_is_byte_identical(pipeline, tmp_path):
    args = ["report", str(pipeline / "out.fit-sweep.json"), str(pipeline / "dens.json")]
    assert main(args + ["-o", "a.md"]) == 0
    assert main(args + ["-o", "b.md"]) == 0
    assert (tmp_path / "a.md").read_bytes() == (tmp_path / "b.md").read_bytes()
    assert "satlow.gamma2" in (tmp_path / "a.md").read_text()


def test_simulate_is_reproducible(tmp_path):
    main(["simulate", "--seed", "3", "-o", "a.csv"])
    main(["simulate", "--seed", "3", "-o", "b.csv"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_levels_zero_field_gap(tmp_path):
    assert main(["levels", "--spin", "hydrogen", "--B", "0:0.3:1000", "-o", "lv.csv"]) == 0
    t = np.genfromtxt(tmp_path / "lv.csv", delimiter=",", names=True)
    assert t.size == 1000
    E = np.array([t[f"E{i}_hz"] for i in range(4)])
    assert np.all(np.diff(E, axis=0) >= 0)
    assert E[3, 0] - E[0, 0] == pytest.approx(1423e6, rel=1e-12)
    assert len([k for k in t.dtype.names if k.startswith("f_")]) == 2


def test_unknown_flag_exit_64():
    with pytest.raises(SystemExit) as e:
        main(["fit-sweep", "--bogus", "x.csv"])
    assert e.value.code == 64


def test_unknown_subcommand_exit_64():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 64


def test_malformed_csv_exit_2(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("B_tesla,f_hz,q_inv\n0.0,5e9,1e-5\n0.2,5e9,1e-5\n0.1,5e9,1e-5\n")
    assert main(["fit-sweep", "bad.csv"]) == 2
    assert "line 4" in capsys.readouterr().err


def test_non_converged_exit_3_writes_partial(tmp_path):
    main(["simulate", "--seed", "1", "-o", "s.csv"])
    (tmp_path / "surfspin.toml").write_text("[fit]\nmax_iter = 1\n")
    assert main(["fit-sweep", "s.csv"]) == 3
    d = _json(tmp_path / "s.fit-sweep.json")
    assert d["fit"]["converged"] is False
    assert "not_converged" in d["fit"]["flags"]


def test_no_resonance_exit_3(tmp_path):
    f = np.linspace(4.99e9, 5.01e9, 500)
    rows = "\n".join(f"{float(x)!r},1.0,0.0" for x in f)
    (tmp_path / "flat.csv").write_text("f_hz,s21_re,s21_im\n" + rows + "\n")
    assert main(["fit-resonance", "flat.csv"]) == 3
    assert "error" in _json(tmp_path / "flat.fit-resonance.json")


def test_config_unknown_key_exit_2(tmp_path):
    (tmp_path / "c.toml").write_text("[fit]\nrobustness = true\n")
    assert main(["levels", "--B", "0:0.1:3", "--config", "c.toml"]) == 2


def test_config_from_env_path(tmp_path, monkeypatch):
    d = tmp_path / "cfgdir"
    d.mkdir()
    (d / "surfspin.toml").write_text(f"[paths]\nout_dir = \"{tmp_path / 'results'}\"\n")
    monkeypatch.setenv("SURFSPIN_CONFIG_PATH", str(d))
    assert main(["simulate", "--scenario", "three-peak"]) == 0
    assert (tmp_path / "results" / "out.csv").exists()


def test_multiple_files_and_plots(tmp_path):
    for s in (1, 2):
        main(["simulate", "--seed", str(s), "-o", f"s{s}.csv"])
    assert main(["fit-sweep", "s1.csv", "s2.csv", "--jobs", "2", "--plot", "--out-dir", "o"]) == 0
    for s in (1, 2):
        svg = (tmp_path / "o" / f"s{s}.fit-sweep.svg").read_text()
        assert "config_hash" in svg
    a = (tmp_path / "o" / "s1.fit-sweep.svg").read_bytes()
    main(["fit-sweep", "s1.csv", "--plot", "--out-dir", "o2"])
    assert (tmp_path / "o2" / "s1.fit-sweep.svg").read_bytes() == a


def test_other_fit_commands(tmp_path):
    scen = {"saturation": "fit-saturation", "angle": "fit-angle",
            "peak_positions": "fit-levels", "temperature": "fit-temperature"}
    for kind, cmd in scen.items():
        (tmp_path / f"{kind}.json").write_text(json.dumps({"kind": kind, "seed": 0}))
        assert main(["simulate", "--scenario", f"{kind}.json", "-o", f"{kind}.csv"]) == 0
        assert main([cmd, f"{kind}.csv"]) == 0, cmd
        assert (tmp_path / f"{kind}.{cmd}.json").exists()
    t = _json(tmp_path / "temperature.fit-temperature.json")
    assert t["ranking"][0] == "doublet"


def test_fit_saturation_t1(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps({"kind": "saturation", "seed": 0,
                                                 "noise": {"rel": 0.0}}))
    main(["simulate", "--scenario", "s.json", "-o", "s.csv"])
    assert main(["fit-saturation", "s.csv", "--t2e", "11.5e-9", "--alpha", "0.21"]) == 0
    T1 = _json(tmp_path / "s.fit-saturation.json")["fit"]["derived"]["T1"]
    assert 150e-6 <= T1 <= 220e-6


def test_spin_density_omega_flags(tmp_path):
    (tmp_path / "g.toml").write_text("[geometry]\nb = 5e-6\nw = 2e-6\nL_res = 2e-3\n")
    assert main(["spin-density", "--omega", "0.95e6", "--omega", "satlow=0.84e6",
                 "--geometry", "g.toml", "-o", "d.json"]) == 0
    d = _json(tmp_path / "d.json")
    assert d["n_breakdown"]["sathigh"] == 0.0
    assert main(["spin-density"]) == 64


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "surfspin", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
