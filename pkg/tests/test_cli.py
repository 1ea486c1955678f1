import csv
import json

import pytest

from uamplan.cli import main
from uamplan.config import RunConfig

TIMING = {"timing.json", "timing.csv"}


def data_files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name not in TIMING}


def small_config(tmp_path, **sections):
    cfg = RunConfig().replace(scenario={"n_aircraft": 3, "radius": 4000.0}, **sections)
    path = tmp_path / "cfg.json"
    cfg.dump(path)
    return str(path)


def test_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) != 0
    assert "config not found" in capsys.readouterr().err


def test_bad_config_value(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"scenario": {"n_aircraft": 0}}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) != 0
    assert "error:" in capsys.readouterr().err


def test_run_outputs_and_worker_independence(tmp_path):
    cfg = small_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--seed", "4", "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--seed", "4", "--out", str(b), "--workers", "2"]) == 0
    fa = data_files(a)
    assert fa == data_files(b)
    for name in ("config.json", "events.csv", "decisions.csv", "summary.json",
                 "trajectories/aircraft_000.csv", "trajectories/aircraft_002.csv"):
        assert name in fa
    summary = json.loads(fa["summary.json"])
    assert summary["n_aircraft"] == 3 and summary["all_arrived"] and summary["nmac_events"] == 0
    with open(a / "trajectories" / "aircraft_000.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0][:4] == ["step", "t", "x", "y"]
    assert len(rows) - 1 == summary["arrivals"]["0"] + 1


def test_config_echo_round_trips(tmp_path):
    cfg = small_config(tmp_path, safety={"mode": "shield"})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--seed", "9", "--out", str(a)]) == 0
    assert main(["run", "--config", str(a / "config.json"), "--out", str(b)]) == 0
    assert data_files(a) == data_files(b)
    echoed = RunConfig.load(a / "config.json")
    assert echoed.scenario.seed == 9 and echoed.safety.mode == "shield"


def test_experiment_outputs(tmp_path):
    cfg = small_config(tmp_path, experiment={"aircraft_counts": (2,), "repetitions": 2,
                                             "modes": ("baseline", "shield")})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", cfg, "--out", str(a)]) == 0
    assert main(["experiment", "--config", cfg, "--out", str(b), "--workers", "2"]) == 0
    fa = data_files(a)
    assert fa == data_files(b)
    report = json.loads(fa["report.json"])
    assert len(report["cells"]) == 2 and report["repetitions"] == 2
    assert "plan_time_mean" not in fa["report.json"].decode()
    assert (a / "timing.csv").is_file()
    with open(a / "paired_deltas.csv") as f:
        deltas = list(csv.DictReader(f))
    with open(a / "episodes.csv") as f:
        eps = {(r["repetition"], r["mode"]): int(r["nmac_events"]) for r in csv.DictReader(f)}
    assert len(deltas) == 2
    for d in deltas:
        assert int(d["nmac_delta"]) == eps[(d["repetition"], d["mode_a"])] - eps[(d["repetition"], d["mode_b"])]


def test_experiment_single_repetition_flags_std(tmp_path):
    cfg = small_config(tmp_path, experiment={"aircraft_counts": (2,), "repetitions": 1,
                                             "modes": ("baseline",)})
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    cell = json.loads((tmp_path / "o" / "report.json").read_text())["cells"][0]
    assert cell["std_undefined"] and cell["nmac_std"] == 0.0


def test_reach_outputs(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reach", "--out", str(a), "--fresh", "200"]) == 0
    assert "containment fraction" in capsys.readouterr().out
    assert main(["reach", "--out", str(b), "--fresh", "200", "--workers", "2"]) == 0
    fa = data_files(a)
    assert fa == data_files(b)
    cfg = RunConfig()
    rows = fa["reach_bounds.csv"].decode().splitlines()
    assert len(rows) - 1 == round(cfg.reach.horizon / cfg.vehicle.dt) + 1
    for p in ("xy", "xz", "yz"):
        assert len(fa[f"projection_{p}.csv"].decode().splitlines()) == len(rows)
    assert json.loads(fa["reach.json"])["containment"] >= 0.95


def test_reach_zero_radius_rejected(tmp_path, capsys):
    assert main(["reach", "--r0", "0", "--out", str(tmp_path / "o")]) != 0
    assert "epsilon" in capsys.readouterr().err


def test_reach_custom_state(tmp_path):
    out = tmp_path / "o"
    assert main(["reach", "--state", "0,0,1500,0.5,0,0.5,0.1,60", "--seed", "3",
                 "--fresh", "50", "--out", str(out)]) == 0
    assert json.loads((out / "reach.json").read_text())["seed"] == 3


def test_unknown_mode_rejected():
    with pytest.raises(SystemExit):
        main(["run", "--mode", "reckless"])
