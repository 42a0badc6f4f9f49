"""Tests for the batch experiment runner: configs, artifacts, exit codes."""

import json

import numpy as np
import pytest

from sdskit import cli


def _write_config(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SIMULATE_CFG = """
kind = "simulate"

[system]
family = "reflected_rw"
b_law = { kind = "exponential", rate = 1.0 }

[plan]
horizon = 500
replicas = 4
seed = 42
points = [0.0]
record = ["strided", 5]
"""


# ---------------------------------------------------------------------------
# exit codes

def test_exit_zero_on_success(tmp_path, capsys):
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG)
    rc = cli.main(["run", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    assert str(tmp_path / "out") in capsys.readouterr().out


def test_exit_two_on_missing_config(tmp_path, capsys):
    rc = cli.main(["run", str(tmp_path / "nope.toml")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_exit_two_on_bad_toml(tmp_path, capsys):
    cfg = _write_config(tmp_path, "bad.toml", "kind = [unclosed")
    assert cli.main(["run", cfg]) == 2


def test_exit_two_on_unknown_kind(tmp_path):
    cfg = _write_config(tmp_path, "k.toml", 'kind = "flythemoon"\n')
    assert cli.main(["run", cfg]) == 2


def test_exit_two_on_unknown_key(tmp_path):
    cfg = _write_config(tmp_path, "k.toml", SIMULATE_CFG + "\nbananas = 1\n")
    assert cli.main(["run", cfg]) == 2


def test_exit_two_on_domain_error(tmp_path, capsys):
    cfg = _write_config(tmp_path, "k.toml", """
kind = "kac"
[system]
family = "reflected_rw"
b_law = { kind = "pareto", a = 0.5 }
[plan]
horizon = 10
replicas = 10
""")
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2


def test_exit_three_on_assertion_failure(tmp_path, capsys):
    # too few ladder epochs within max_steps -> SdsError -> exit 3
    cfg = _write_config(tmp_path, "d.toml", """
kind = "dyadic"
[plan]
seed = 1
[params]
epochs = 10
max_steps = 4
""")
    rc = cli.main(["run", cfg, "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "assertion failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# artifacts and reproducibility

def test_simulate_artifacts_and_byte_identical_rerun(tmp_path):
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG)
    out1 = cli.run_config(cfg, out_dir=tmp_path / "r1")
    out2 = cli.run_config(cfg, out_dir=tmp_path / "r2")
    for name in ("report.json", "trajectories.csv"):
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, name
    report = json.loads((out1 / "report.json").read_text())
    assert report["kind"] == "simulate"
    assert report["rows"] == 4 * 101   # 4 replicas x (500/5 + start)
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["config"]["plan"]["seed"] == 42
    assert "versions" in manifest


def test_workers_do_not_change_output(tmp_path):
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG)
    out1 = cli.run_config(cfg, workers=1, out_dir=tmp_path / "w1")
    out3 = cli.run_config(cfg, workers=3, out_dir=tmp_path / "w3")
    assert (out1 / "trajectories.csv").read_bytes() == (out3 / "trajectories.csv").read_bytes()
    assert (out1 / "report.json").read_bytes() == (out3 / "report.json").read_bytes()


def test_seed_override_changes_data(tmp_path):
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG)
    base = cli.run_config(cfg, out_dir=tmp_path / "a")
    over = cli.run_config(cfg, out_dir=tmp_path / "b", seed_override=43)
    assert (base / "trajectories.csv").read_bytes() != (over / "trajectories.csv").read_bytes()


def test_output_root_env_is_honored(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "envroot"))
    monkeypatch.chdir(tmp_path)
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG)
    out = cli.run_config(cfg)
    assert out == tmp_path / "envroot" / "sim"
    assert (out / "report.json").is_file()


def test_binary_format_layout(tmp_path):
    cfg = _write_config(tmp_path, "sim.toml", SIMULATE_CFG + '\n[params]\nformat = "binary"\n')
    out = cli.run_config(cfg, out_dir=tmp_path / "bin")
    raw = (out / "trajectories.bin").read_bytes()
    assert raw[:8] == b"SDSKBIN1"
    n_rows = int(np.frombuffer(raw[8:16], dtype="<u8")[0])
    n_cols = int(np.frombuffer(raw[16:20], dtype="<u4")[0])
    assert (n_rows, n_cols) == (4 * 101, 5)
    data = np.frombuffer(raw[20:], dtype="<f8").reshape(n_rows, n_cols)
    assert set(data[:, 0]) == {0.0, 1.0, 2.0, 3.0}     # replica column
    assert np.all(data[:, 3] >= 0.0)                   # reflected values


# ---------------------------------------------------------------------------
# kind-specific runs

def test_invariant_run_reports_small_ks(tmp_path):
    cfg = _write_config(tmp_path, "inv.toml", """
kind = "invariant"
[system]
family = "reflected_rw"
b_law = { kind = "exponential", rate = 1.0 }
[plan]
horizon = 2000
replicas = 2000
seed = 3
record = "summary"
[params]
bins = 32
""")
    out = cli.run_config(cfg, out_dir=tmp_path / "o")
    report = json.loads((out / "report.json").read_text())
    assert report["ks"] <= 0.05
    assert report["samples"] == 2000
    hist = (out / "histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_lo,bin_hi,mass"
    assert len(hist) == 33


def test_dyadic_run_all_distances_two_thirds(tmp_path):
    cfg = _write_config(tmp_path, "dy.toml", """
kind = "dyadic"
[plan]
seed = 1
[params]
x = "1"
y = "1/3"
epochs = 8
""")
    out = cli.run_config(cfg, out_dir=tmp_path / "o")
    report = json.loads((out / "report.json").read_text())
    assert len(report["epochs"]) == 8
    assert all(e["distance"] == "2/3" for e in report["epochs"])
    lines = (out / "epochs.csv").read_text().splitlines()
    assert lines[0] == "epoch,k,value_x,value_y,distance"
    assert all(line.endswith(",2/3") for line in lines[1:])


def test_probe_run_exact_gap(tmp_path):
    cfg = _write_config(tmp_path, "pr.toml", """
kind = "probe"
[params]
base = 2
seeds = ["1"]
depth = 12
""")
    out = cli.run_config(cfg, out_dir=tmp_path / "o")
    report = json.loads((out / "report.json").read_text())
    assert report["points"] == 130
    assert report["largest_gap"] == "1/16"
    assert report["min"] == "0" and report["max"] == "1"
    assert not report["truncated"]


def test_criteria_run(tmp_path):
    cfg = _write_config(tmp_path, "cr.toml", """
kind = "criteria"
[system]
family = "reflected_rw"
b_law = { kind = "exponential", rate = 1.0 }
""")
    out = cli.run_config(cfg, out_dir=tmp_path / "o")
    report = json.loads((out / "report.json").read_text())
    assert report["conditions"] == {"i": "holds", "ii": "holds", "iii": "holds", "iv": "holds"}
    assert report["mean_b"] == 1.0


def test_classify_run(tmp_path):
    cfg = _write_config(tmp_path, "cl.toml", """
kind = "classify"
[system]
family = "affine"
a_law = { kind = "constant", c = 2.0 }
b_law = { kind = "constant", c = 1.0 }
[plan]
horizon = 500
replicas = 30
points = [1.0]
""")
    out = cli.run_config(cfg, out_dir=tmp_path / "o")
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "transient-indicative"
    assert report["transient_fraction"] == 1.0
    lines = (out / "replicas.csv").read_text().splitlines()
    assert len(lines) == 31


def test_plan_forbidden_for_probe(tmp_path):
    cfg = _write_config(tmp_path, "pr.toml", """
kind = "probe"
[plan]
seed = 0
[params]
depth = 4
""")
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
