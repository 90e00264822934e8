import json
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from spheroll import quasistatic as q
from spheroll.cli import main
from spheroll.errors import SchemaError
from spheroll.harness import config as cfgmod
from spheroll.harness import scenarios
from spheroll.harness.closed_loop import ClosedLoop, LoopSettings
from spheroll.controller import WaypointTask
from spheroll.dynamics import ShellState


def single_waypoint(**disturbance):
    cfg = cfgmod.default_config("waypoints")
    wp = cfgmod.WaypointSettings(start=(0.0, -1.0), points=({"x": 0.0, "y": 0.0, "speed": "stop"},), timeout=250.0)
    cfg = cfg.replace(waypoints=wp)
    if disturbance:
        cfg = cfg.replace(disturbance=cfgmod.Disturbance(enabled=True, **disturbance))
    return cfg


@pytest.mark.parametrize("kind", cfgmod.KINDS)
def test_config_round_trip_is_byte_identical(tmp_path, kind):
    text = cfgmod.default_config(kind).to_json()
    cfg = cfgmod.loads(text)
    assert cfg.to_json() == text
    path = tmp_path / "c.json"
    cfg.write(path)
    assert path.read_text() == text


def test_config_missing_field_is_named():
    data = json.loads(cfgmod.default_config("circle").to_json())
    del data["kind"]
    with pytest.raises(SchemaError, match="kind"):
        cfgmod.from_dict(data)


def test_config_bad_value_reports_line():
    text = cfgmod.default_config("circle").to_json().replace('"workers": 1', '"workers": "two"')
    with pytest.raises(SchemaError) as info:
        cfgmod.loads(text)
    assert info.value.field == "workers"
    assert info.value.line == text.splitlines().index('  "workers": "two"') + 1


def test_config_rejects_broken_json_and_schema():
    with pytest.raises(SchemaError) as info:
        cfgmod.loads('{\n  "schema": 1,\n  "kind": }')
    assert info.value.line == 3
    data = cfgmod.default_config("circle").to_dict()
    data["schema"] = 99
    with pytest.raises(SchemaError, match="schema"):
        cfgmod.from_dict(data)
    data = cfgmod.default_config("circle").to_dict()
    data["waypoints"]["points"] = [{"x": 0.0, "y": 0.0, "speed": -1}]
    with pytest.raises(SchemaError, match="speed"):
        cfgmod.from_dict(data)
    data = cfgmod.default_config("circle").to_dict()
    data["robot"]["R"] = -1.0
    with pytest.raises(SchemaError, match="robot"):
        cfgmod.from_dict(data)


def test_config_unknown_field_warns():
    data = cfgmod.default_config("circle").to_dict()
    data["circle"]["colour"] = "red"
    with pytest.warns(UserWarning, match="circle.colour"):
        cfg = cfgmod.from_dict(data)
    assert cfg.circle == cfgmod.CircleSettings()


def test_loop_settings_apply_disturbance_only_when_enabled():
    cfg = single_waypoint()
    assert cfg.loop_settings().pose_noise == 0.0
    off = cfg.replace(disturbance=cfgmod.Disturbance(enabled=False, pose_noise=0.01))
    assert off.loop_settings().pose_noise == 0.0
    on = single_waypoint(pose_noise=0.01, slope_force=(0.1, 0.0, 0.0))
    assert on.loop_settings().pose_noise == 0.01 and on.loop_settings().slope_force == (0.1, 0.0, 0.0)


def test_report_round_trip(tmp_path):
    rep = scenarios.RunReport("circle", [{"R_g": 0.2, "R_fit": 0.201}], [scenarios._check_max("radius error", 0.005, 0.1)])
    rep.failures["x"] = "boom"
    path = tmp_path / "r.json"
    rep.write(path)
    back = scenarios.RunReport.read(path)
    assert back.to_dict() == rep.to_dict()
    assert not back.passed
    assert back.summary_lines() == ["PASS\tradius error\t0.005 <= 0.1", "FAIL\tx\tboom"]


def test_closed_loop_log_and_trajectory_are_contiguous(params, table):
    loop = ClosedLoop(params, table, settings=LoopSettings(), st0=ShellState.at_rest(params))
    task = WaypointTask(np.zeros(3), np.array([0.5, 0.0, 0.0]), 0.35)
    loop.run_task(task, 2.0)
    traj = loop.trajectory()
    assert traj.t[-1] == pytest.approx(2.0)
    assert np.all(np.diff(traj.t) > 0)
    assert len(loop.log) == 40


def test_cli_quasistatic_sweep(tmp_path):
    res = CliRunner().invoke(main, ["--out-dir", str(tmp_path), "quasistatic", "sweep", "--points", "5"])
    assert res.exit_code == 0, res.output
    lines = res.output.strip().splitlines()
    assert lines[0].split("\t") == list(q.TABLE_CSV_COLUMNS)
    assert len(lines) == 6
    assert (tmp_path / "quasistatic.csv").exists()


def test_cli_stability_sweep_with_plots(tmp_path):
    res = CliRunner().invoke(main, ["--out-dir", str(tmp_path), "--plots", "stability", "sweep", "--points", "6"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "eigenvalue_locus.csv").exists()
    assert (tmp_path / "eigenvalue_locus.png").stat().st_size > 0


def test_cli_report_compare(tmp_path):
    a = scenarios.RunReport("circle", [{"R_fit": 0.2}])
    b = scenarios.RunReport("circle", [{"R_fit": 0.2 + 1e-9}])
    a.write(tmp_path / "a.json")
    b.write(tmp_path / "b.json")
    runner = CliRunner()
    same = runner.invoke(main, ["report", "compare", str(tmp_path / "a.json"), str(tmp_path / "a.json")])
    assert same.exit_code == 0 and "RESULT\tMATCH" in same.output
    diff = runner.invoke(main, ["report", "compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")])
    assert diff.exit_code == 1 and "RESULT\tDIFFER" in diff.output
    close = runner.invoke(main, ["report", "compare", "--rtol", "1e-6", str(tmp_path / "a.json"), str(tmp_path / "b.json")])
    assert close.exit_code == 0


def test_cli_config_error_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1}\n')
    proc = subprocess.run(
        [sys.executable, "-m", "spheroll", "--config", str(bad), "sim", "circle"], capture_output=True, text=True
    )
    assert proc.returncode == 2
    assert "kind" in proc.stderr


@pytest.mark.slow
def test_single_waypoint_run_is_bit_identical(tmp_path):
    cfg = single_waypoint()
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        rep = scenarios.run(cfg, str(d))
        assert rep.passed, rep.summary_lines()
        outs.append(d)
    for fname in ("waypoints_trajectory.csv", "waypoints_control.csv", "waypoints_summary.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2])
def test_single_waypoint_with_pose_noise(seed):
    cfg = single_waypoint(pose_noise=0.002).replace(seed=seed)
    rep = scenarios.run(cfg)
    assert rep.passed, rep.summary_lines()
    assert rep.metrics[0]["distance"] <= cfg.tolerances.stop_abs


@pytest.mark.slow
def test_cli_sim_waypoints_writes_outputs(tmp_path):
    cfg = single_waypoint()
    path = tmp_path / "wp.json"
    cfg.write(path)
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["--config", str(path), "--out-dir", str(out), "--plots", "sim", "waypoints"])
    assert res.exit_code == 0, res.output
    assert "RESULT\tPASS" in res.output
    for fname in ("waypoints_config.json", "waypoints_report.json", "waypoints_trajectory.csv", "waypoints_path.png"):
        assert (out / fname).exists()
    assert cfgmod.load(out / "waypoints_config.json").waypoints == cfg.waypoints
