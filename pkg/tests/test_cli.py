"""End-to-end checks of the command line interface."""

import csv
import hashlib
import json
import subprocess
import sys

import pytest
import yaml


BASE_CONFIG = {
    "particle": {"radius_nm": 100},
    "gas": {"pressure_mbar": 1.0e-2, "temperature_K": 300},
    "trap": {"power_mW": 70, "waist_x_um": 0.7, "wavelength_nm": 1550},
    "sweep": {"p_min_mbar": 1.0e-8, "p_max_mbar": 1.0e3, "n_points": 12},
    "oscillator": {"mass_fg": 5.0, "frequency_kHz": 20,
                   "damping_Hz": 318.31, "temperature_K": 300,
                   "duffing_um2": 0},
    "simulation": {"dt_ns": 400, "duration_ms": 1.0, "n_traj": 50,
                   "record_every": 1, "seed": 7},
    "psd": {"n_segments": 4},
    "modulation": {"phase_rad": 0.7853981633974483, "depths": [0.01]},
    "relax": {"ratio": 0.1},
    "fluctuation": {"feedback_gain_um2": 5.0},
    "squeeze": {"ratio": 2.0, "time_ms": 0.5},
    "engine": {"mass_fg": 5.0, "damping_Hz": 100000, "t_hot_K": 600,
               "t_cold_K": 300, "k_max_stiffness_fN_um": 50,
               "k_min_stiffness_fN_um": 20, "tau_hot_ms": 5,
               "tau_cold_ms": 5, "regime": "overdamped"},
}


def write_config(tmp_path, overrides=None, name="cfg.yaml"):
    cfg = yaml.safe_load(yaml.safe_dump(BASE_CONFIG))
    for section, keys in (overrides or {}).items():
        cfg.setdefault(section, {}).update(keys)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run_cli(args, **kw):
    return subprocess.run([sys.executable, "-m", "levitherm.cli", *args],
                          capture_output=True, text=True, **kw)


def sha256_of(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_help_lists_subcommands():
    res = run_cli(["--help"])
    assert res.returncode == 0
    for name in ("env-sweep", "simulate", "psd", "modulate", "relax",
                 "fluctuation", "kramers", "engine", "squeeze"):
        assert name in res.stdout


def test_missing_config_file_is_a_usage_error(tmp_path):
    res = run_cli(["simulate", "--config", str(tmp_path / "nope.yaml")])
    assert res.returncode == 2


def test_validation_reports_all_violations(tmp_path):
    cfg = write_config(tmp_path, {"oscillator": {"frequency_kHz": -5},
                                  "simulation": {"n_traj": 0}})
    out = tmp_path / "out"
    res = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 2
    err = json.loads(res.stderr)["error"]
    assert err["type"] == "ValidationError"
    joined = " ".join(err["violations"])
    assert "frequency_kHz" in joined
    assert "n_traj" in joined
    # no data files are left behind on a validation failure
    assert not list(out.glob("*.csv")) and not list(out.glob("*.json"))


def test_simulate_outputs_and_manifest(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    res = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0, res.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert manifest["seed"] == 7
    names = {o["path"] for o in manifest["outputs"]}
    assert names == {"trajectory_stats.csv", "simulate_summary.json"}
    for entry in manifest["outputs"]:
        assert sha256_of(out / entry["path"]) == entry["sha256"]
    # CSV carries the config hash and parses cleanly
    lines = (out / "trajectory_stats.csv").read_text().splitlines()
    assert lines[0] == f"# config_hash={manifest['config_hash']}"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) > 10
    assert "time_s" in rows[0]
    summary = json.loads((out / "simulate_summary.json").read_text())
    assert summary["config_hash"] == manifest["config_hash"]


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        res = run_cli(["simulate", "--config", str(cfg), "--out", str(out)])
        assert res.returncode == 0, res.stderr
    for name in ("trajectory_stats.csv", "simulate_summary.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_seed_override_changes_data_and_manifest(tmp_path):
    cfg = write_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_cli(["simulate", "--config", str(cfg), "--out", str(out_a)])
    res = run_cli(["simulate", "--config", str(cfg), "--out", str(out_b),
                   "--seed", "99"])
    assert res.returncode == 0, res.stderr
    manifest = json.loads((out_b / "manifest.json").read_text())
    assert manifest["seed"] == 99
    assert ((out_a / "trajectory_stats.csv").read_bytes()
            != (out_b / "trajectory_stats.csv").read_bytes())


def test_json_format(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    res = run_cli(["simulate", "--config", str(cfg), "--out", str(out),
                   "--format", "json"])
    assert res.returncode == 0, res.stderr
    table = json.loads((out / "trajectory_stats.json").read_text())
    assert "time_s" in table
    assert "config_hash" in table
    assert not (out / "trajectory_stats.csv").exists()


def test_runtime_failure_leaves_incomplete_manifest(tmp_path):
    # far too few trajectories for the histogram fit
    cfg = write_config(tmp_path, {"simulation": {"n_traj": 8}})
    out = tmp_path / "out"
    res = run_cli(["fluctuation", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 1
    err = json.loads(res.stderr)["error"]
    assert err["type"] != "ValidationError"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is False


def test_env_sweep_table(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    res = run_cli(["env-sweep", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0, res.stderr
    lines = (out / "env_sweep.csv").read_text().splitlines()
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 12
    assert float(rows[0]["pressure_mbar"]) == pytest.approx(1e-8)
    # damping grows with pressure across the sweep
    assert (float(rows[-1]["gamma_cm_rad_s"])
            > float(rows[0]["gamma_cm_rad_s"]))


def test_engine_summary(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    res = run_cli(["engine", "--config", str(cfg), "--out", str(out)])
    assert res.returncode == 0, res.stderr
    summary = json.loads((out / "engine_cycle.json").read_text())
    assert 0.0 < summary["efficiency"] <= summary["eta_carnot"]
