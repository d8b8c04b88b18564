import json
import sys

import pytest

from drivecone import cli


def _run(*args):
    return cli.main([str(a) for a in args])


def test_validate_ok_and_schema_failure(tmp_path, scenario_file):
    out = tmp_path / "v.json"
    assert _run("validate", scenario_file, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["totals"]["files"] == 1 and doc["totals"]["invalid_files"] == 0

    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "dt": 0.1, "objects": [], "roads": [{"type": "lane_center"}]}')
    assert _run("validate", bad, "--out", tmp_path / "b.json") == cli.EXIT_INVALID
    row = json.loads((tmp_path / "b.json").read_text())["files"][0]
    assert "roads[0]" in row["error"]


def test_validate_directory(tmp_path):
    assert _run("synth", "audit", "--out", tmp_path / "a") == 0
    assert _run("validate", tmp_path / "a", "--out", tmp_path / "r.json") == 0
    totals = json.loads((tmp_path / "r.json").read_text())["totals"]
    assert totals["n_vehicles"] == 100
    assert totals["infeasible_goal"]["rate"] == 0.03
    assert totals["initial_collision"]["rate"] == 0.02


def test_rollout_policies(tmp_path, scenario_file):
    for pol in ("replay", "random", "constant:0.5,0.05"):
        out = tmp_path / f"{pol}.json"
        assert _run("rollout", scenario_file, "--policy", pol, "--seed", 2, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["policy"] == pol and doc["aggregate"]["n_vehicles"] == len(doc["vehicles"])


def test_rollout_replay_without_removal(tmp_path, scenario_file):
    out = tmp_path / "r.json"
    _run("rollout", scenario_file, "--no-removal", "--out", out)
    agg = json.loads(out.read_text())["aggregate"]
    assert agg["ade"] == 0.0 and agg["fde"] == 0.0 and agg["goal_rate"] == 1.0


def test_rollout_stdin(tmp_path, scenario_file, monkeypatch):
    import io
    lines = "".join(json.dumps({"0": [0.0, 0.0]}) + "\n" for _ in range(80))
    monkeypatch.setattr(sys, "stdin", io.StringIO(lines))
    out = tmp_path / "s.json"
    assert _run("rollout", scenario_file, "--policy", "stdin", "--out", out) == 0
    assert json.loads(out.read_text())["policy"] == "stdin"


def test_unknown_policy_is_usage_error(scenario_file):
    with pytest.raises(SystemExit) as e:
        _run("rollout", scenario_file, "--policy", "teleport")
    assert e.value.code == 2


def test_render(tmp_path, scenario_file):
    for view in ("cone", "full"):
        out = tmp_path / f"{view}.png"
        assert _run("render", scenario_file, "--ego", 0, "--step", 20, "--view", view, "--out", out) == 0
        assert out.read_bytes()[:4] == b"\x89PNG"
    with pytest.raises(SystemExit):
        _run("render", scenario_file, "--ego", 999, "--out", tmp_path / "x.png")


def test_bench_no_timing_has_no_clock_fields(tmp_path, scenario_file):
    out = tmp_path / "b.json"
    assert _run("bench", "--scenarios", scenario_file, "--repeats", 1, "--no-timing", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert "sps_mean" not in doc and len(doc["work"]["digests"]) == 1
    assert _run("bench", "--scenarios", scenario_file, "--repeats", 1, "--out", out) == 0
    assert json.loads(out.read_text())["sps_mean"] > 0


def test_workers_give_the_same_answer(tmp_path):
    _run("synth", "audit", "--out", tmp_path / "a")
    _run("validate", tmp_path / "a", "--out", tmp_path / "one.json")
    _run("validate", tmp_path / "a", "--workers", 2, "--out", tmp_path / "two.json")
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
