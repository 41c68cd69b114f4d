import json

import jsonschema
import numpy as np
import pytest
import yaml

from slipnav import cli, pipeline
from slipnav.cli import EXIT_DATA, EXIT_HEALTH, EXIT_OK, EXIT_USAGE, main
from slipnav.evaluate import REPORT_SCHEMA

SHORT_SCENARIO = {
    "seed": 4,
    "segments": [
        {"kind": "stop", "duration": 5.0},
        {"kind": "straight", "duration": 10.0, "speed": 0.8, "slip": 0.1},
        {"kind": "arc", "duration": 8.0, "speed": 0.8, "yaw_rate": 0.1, "slip": 0.3},
        {"kind": "stop", "duration": 5.0},
    ],
}


def test_toy_static_prints_verdict(tmp_path, capsys):
    assert main(["toy-static", "-o", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out.strip().splitlines()
    assert out[-1] == "ZU+NH < ZU < INS-only"
    doc = json.loads((tmp_path / "toy_static.json").read_text())
    assert doc["passed"] is True


def test_simulate_run_evaluate_chain(tmp_path, capsys):
    scen = tmp_path / "short.yaml"
    scen.write_text(yaml.safe_dump(SHORT_SCENARIO))
    sim, run, rep = tmp_path / "sim", tmp_path / "run", tmp_path / "rep" / "report.json"
    assert main(["simulate", str(scen), "-o", str(sim)]) == EXIT_OK
    assert {p.name for p in sim.iterdir()} >= {"imu.csv", "wheels.csv", "truth.csv", "config.yaml", "scenario.yaml"}
    assert main(["run", str(sim / "config.yaml"), "--imu", str(sim / "imu.csv"), "--wheels",
                 str(sim / "wheels.csv"), "-o", str(run)]) == EXIT_OK
    assert {p.name for p in run.iterdir()} >= {"proposed.csv", "direct.csv", "wo.csv", "slip.csv", "run_stats.json"}
    assert main(["evaluate", str(sim / "config.yaml"), "--est", str(run), "--truth", str(sim / "truth.csv"),
                 "-o", str(rep)]) == EXIT_OK
    doc = json.loads(rep.read_text())
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert set(doc["estimators"]) == {"proposed", "direct", "wheel_odometry"}
    assert doc["slip"]["n_records"] == 281
    assert doc["health"]["violations"] == 0
    assert (rep.parent / "errors_proposed.csv").is_file()
    assert "slip: accuracy" in capsys.readouterr().out


def test_chain_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["--seed", "2", "simulate", "circle", "-o", str(tmp_path / name)]) == EXIT_OK
        d = tmp_path / name
        assert main(["run", str(d / "config.yaml"), "--imu", str(d / "imu.csv"), "--wheels", str(d / "wheels.csv"),
                     "-o", str(d / "out")]) == EXIT_OK
    for fn in ("imu.csv", "wheels.csv", "truth.csv", "out/proposed.csv", "out/slip.csv"):
        assert (tmp_path / "a" / fn).read_bytes() == (tmp_path / "b" / fn).read_bytes()


def test_run_uses_config_output_dir(tmp_path):
    main(["simulate", "circle", "-o", str(tmp_path)])
    cfg = yaml.safe_load((tmp_path / "config.yaml").read_text())
    cfg["output_dir"] = str(tmp_path / "from_cfg")
    (tmp_path / "config.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["run", str(tmp_path / "config.yaml"), "--imu", str(tmp_path / "imu.csv"), "--wheels",
                 str(tmp_path / "wheels.csv")]) == EXIT_OK
    assert (tmp_path / "from_cfg" / "proposed.csv").is_file()


def test_missing_input_exits_2_with_path(tmp_path, capsys):
    main(["simulate", "circle", "-o", str(tmp_path)])
    capsys.readouterr()
    missing = tmp_path / "nowhere" / "imu.csv"
    code = main(["run", str(tmp_path / "config.yaml"), "--imu", str(missing), "--wheels",
                 str(tmp_path / "wheels.csv"), "-o", str(tmp_path / "o")])
    assert code == EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_bad_scenario_exits_2(tmp_path, capsys):
    assert main(["simulate", "no-such-scenario", "-o", str(tmp_path)]) == EXIT_DATA
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"segments": [{"kind": "straight", "duration": 1.0, "speed": 9.0}]}))
    assert main(["simulate", str(bad), "-o", str(tmp_path)]) == EXIT_DATA


@pytest.mark.parametrize("argv", [["--frobnicate"], [], ["run"], ["toy-static"], ["evaluate", "c.yaml"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_help_exits_0(capsys):
    assert main(["--help"]) == EXIT_OK


def test_health_failure_exits_3(tmp_path, monkeypatch, capsys):
    main(["simulate", "circle", "-o", str(tmp_path)])

    def broken(*args, **kw):
        return -np.eye(15)

    monkeypatch.setattr(pipeline, "process_noise", broken)
    code = main(["run", str(tmp_path / "config.yaml"), "--imu", str(tmp_path / "imu.csv"), "--wheels",
                 str(tmp_path / "wheels.csv"), "-o", str(tmp_path / "o")])
    assert code == EXIT_HEALTH
    assert "epoch 1" in capsys.readouterr().err


def test_estimate_file_names():
    assert cli.ESTIMATE_FILES == {"proposed": "proposed.csv", "direct": "direct.csv", "wheel_odometry": "wo.csv"}
