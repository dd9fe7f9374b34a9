import json

import numpy as np
import pytest

from solitonlab import __version__
from solitonlab.cli import main, read_config_file
from solitonlab.warped_soliton import save_profile


@pytest.fixture(scope="module")
def profile_path(profile, tmp_path_factory):
    path = tmp_path_factory.mktemp("prof") / "bryant.csv"
    save_profile(profile, path)
    return path


def test_bryant_default(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bryant", "--out", str(out)]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["first_integral_drift"] <= 1e-8
    assert meta["version"] == __version__ and meta["config"]["tol"] == 1e-10
    assert meta["f_max"] >= 1e4


def test_bryant_zero_extent_is_usage_error(tmp_path):
    assert main(["bryant", "--t-max", "0", "--out", str(tmp_path / "x.csv")]) == 1


def test_bryant_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["bryant", "--t-max", "50", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ja = json.loads(a.with_suffix(".json").read_text())
    jb = json.loads(b.with_suffix(".json").read_text())
    ja["config"].pop("out"), jb["config"].pop("out")
    assert ja == jb


def test_verify_passes(profile_path, tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--profile", str(profile_path), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["pass"] and all(c["pass"] for c in report["checks"])
    assert report["config"]["window"] == [2.0, 100.0]


def test_verify_detects_corruption(profile_path, tmp_path):
    data = np.loadtxt(profile_path, delimiter=",", skiprows=1)
    data[:, 1] *= 1.01
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, data, delimiter=",", header="s,phi,phi_prime,f,f_prime", comments="", fmt="%.17g")
    out = tmp_path / "v.json"
    assert main(["verify", "--profile", str(bad), "--out", str(out)]) == 1
    checks = {c["check"]: c for c in json.loads(out.read_text())["checks"]}
    assert not checks["scalar_evolution"]["pass"]


def test_verify_missing_file(tmp_path):
    assert main(["verify", "--profile", str(tmp_path / "none.csv")]) == 2


def test_verify_malformed_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("hello\n")
    assert main(["verify", "--profile", str(bad)]) == 2


def test_rates(profile_path, tmp_path):
    out = tmp_path / "r.json"
    assert main(["rates", "--profile", str(profile_path), "--quantity", "fR_minus_1", "--out", str(out)]) == 0
    row = json.loads(out.read_text())["rates"][0]
    assert row["exponent"] <= -0.25


def test_spectrum_tensor(tmp_path):
    out = tmp_path / "s.json"
    assert main(["spectrum", "--operator", "tensor", "--lmax", "6", "--out", str(out)]) == 0
    table = json.loads(out.read_text())["table"]
    assert table[0]["multiplicity"] == 1 and abs(table[0]["eigenvalue"]) < 1e-10
    assert abs(table[1]["eigenvalue"] - 2) < 1e-9


def test_spectrum_lmax_too_small():
    assert main(["spectrum", "--operator", "one-form", "--lmax", "2"]) == 1


def test_cylinder_vector(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["cylinder", "--case", "vector", "--seeds", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# solitonlab") and lines[2] == "t,gap,lambda_star"
    report = json.loads(out.with_suffix(".json").read_text())
    assert all(r["gap_exponent"] >= 0.48 for r in report["seeds"])


def test_cylinder_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["cylinder", "--case", "lichnerowicz", "--seeds", "2", "--seed", "9", "--out", str(p)]) == 0
    assert a.read_text().splitlines()[2:] == b.read_text().splitlines()[2:]


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# spectrum run\noperator = scalar\nlmax = 5\n")
    assert read_config_file(cfg) == {"operator": "scalar", "lmax": "5"}
    assert main(["spectrum", "--config", str(cfg), "--lmax", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["operator"] == "scalar" and report["l_max"] == 3


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nope = 1\n")
    assert main(["spectrum", "--config", str(cfg)]) == 1


def test_config_missing_file(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_bad_window_is_usage_error(profile_path):
    assert main(["verify", "--profile", str(profile_path), "--window", "5:1"]) == 1
