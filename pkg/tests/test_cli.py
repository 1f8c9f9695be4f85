"""Command-line interface: outputs, manifests, determinism, exit codes."""
import json
from pathlib import Path

import numpy as np
import pytest

from linwalk.cli import main


def run(argv):
    return main(argv)


def test_relax_command(adult_config, tmp_path, capsys):
    out = tmp_path / "relax"
    rc = run(["relax", "--config", adult_config, "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "T_relax" in text
    T = float(text.split("=")[1].split("s")[0])
    assert 0.84 <= T <= 0.88
    scan = (out / "relax_scan.csv").read_text().splitlines()
    assert scan[0].startswith("T_stride,sv1")
    assert len(scan) > 10
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "relax"
    assert len(manifest["parameter_hash"]) == 64
    assert "relax_scan.csv" in manifest["outputs"]


def test_relax_no_root_exits_nonzero(adult_config, tmp_path):
    rc = run(["relax", "--config", adult_config, "--out", str(tmp_path / "x"),
              "--bracket-lo", "1.0", "--bracket-hi", "1.2"])
    assert rc == 1


def test_bad_config_key_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("m1: 45.7\nwhatever: 1\n")
    rc = run(["relax", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "whatever" in capsys.readouterr().err


def test_gait_command_pseudo_passive(adult_config, tmp_path, capsys):
    out = tmp_path / "gait"
    rc = run(["gait", "--config", adult_config, "--scenario", "pseudo-passive",
              "--speed", "1.0", "--out", str(out), "--samples", "51"])
    assert rc == 0
    res = (out / "residuals.txt").read_text()
    assert "torque_norm" in res
    torque = float([ln for ln in res.splitlines()
                    if ln.startswith("torque_norm")][0].split(":")[1])
    assert torque <= 1e-6
    assert (out / "trajectory.csv").exists()
    record = json.loads((out / "gait_solution.json").read_text())
    assert record["scenario"] == "pseudo-passive"
    assert len(record["Q0"]) == 23


def test_gait_stage_walk_reports_lateral(adult_config, tmp_path):
    out = tmp_path / "stage"
    rc = run(["gait", "--config", adult_config, "--scenario", "stage-walk",
              "--speed", "1.0", "--freq", "1.5", "--out", str(out),
              "--samples", "41"])
    assert rc == 0
    res = (out / "residuals.txt").read_text()
    lat = float([ln for ln in res.splitlines()
                 if ln.startswith("max_lateral_com_speed")][0].split(":")[1])
    assert lat <= 1e-6


def test_sweep_command(adult_config, tmp_path):
    out = tmp_path / "sweep"
    rc = run(["sweep", "--config", adult_config,
              "--speed", "1.4:0.2:1.6", "--freq", "1.6:0.2:2.2",
              "--tds-policy", "human", "--out", str(out)])
    assert rc == 0
    econ = (out / "economy.csv").read_text().splitlines()
    assert econ[0] == "speed,frequency,tds_ratio,economy,feasible"
    assert len(econ) == 1 + 2 * 4
    assert (out / "peaks.csv").exists()


def test_sweep_empty_range_exit_2(adult_config, tmp_path):
    with pytest.raises(SystemExit) as err:
        run(["sweep", "--config", adult_config,
             "--speed", "2.0:0.1:1.0", "--freq", "1:0.1:2",
             "--out", str(tmp_path / "s")])
    assert err.value.code == 2


def test_validate_deterministic_and_passing(adult_config, tmp_path):
    out1 = tmp_path / "v1"
    out2 = tmp_path / "v2"
    rc1 = run(["validate", "--config", adult_config, "--trials", "5",
               "--seed", "7", "--step", "2e-4", "--out", str(out1)])
    rc2 = run(["validate", "--config", adult_config, "--trials", "5",
               "--seed", "7", "--step", "2e-4", "--out", str(out2)])
    assert rc1 == 0 and rc2 == 0
    r1 = (out1 / "validate_report.txt").read_bytes()
    r2 = (out2 / "validate_report.txt").read_bytes()
    assert r1 == r2
    assert b"PASS" in r1


def test_validate_zero_trials_exit_2(adult_config, tmp_path):
    rc = run(["validate", "--config", adult_config, "--trials", "0",
              "--out", str(tmp_path / "v")])
    assert rc == 2


def test_maps_command(adult_config, tmp_path):
    out = tmp_path / "maps"
    rc = run(["maps", "--config", adult_config, "--out", str(out)])
    assert rc == 0
    data = json.loads((out / "stride_maps.json").read_text())
    assert np.array(data["H_stride"]).shape == (23, 23)


def test_infeasible_scenario_exit_1(tmp_path, adult_config):
    # timing too short for the double-support doubling
    cfg = Path(adult_config).read_text().replace("T_ds: 0.3", "T_ds: 0.45")
    cfg = cfg.replace("T_ss: 0.56", "T_ss: 0.40")
    bad = tmp_path / "short.yaml"
    bad.write_text(cfg)
    rc = run(["gait", "--config", str(bad), "--scenario", "long-double-support",
              "--speed", "1.0", "--out", str(tmp_path / "g")])
    assert rc != 0
