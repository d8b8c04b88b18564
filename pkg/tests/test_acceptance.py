"""Acceptance checks. Each test prints one PASS/FAIL line, even under capture."""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from drivecone import _kernels as K
from drivecone import bench, cli, synth
from drivecone.dynamics import MAX_HEADING_RATE, Action, KinState, bicycle_step
from drivecone.metrics import count_interactions, episode_report
from drivecone.obs import Goal
from drivecone.scenario import N_STEPS
from drivecone.sim import (ReplayPolicy, Runner, SimConfig, Simulation, dense_reward, goal_achieved,
                          reward_terms)
from drivecone.spatial import Bvh, RangeTree
from drivecone.visibility import visible_set
from oracles import brute_visible, mp_bicycle, scan_boxes, scan_points


@pytest.fixture
def verdict(capsys):
    def say(n, name, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return say


def test_c01_bicycle_model(verdict):
    rng = np.random.default_rng(1)
    cases = []
    for k in range(1000):
        s = KinState(*rng.uniform(-100, 100, 2), rng.uniform(-math.pi, math.pi), rng.uniform(-30, 30))
        a = Action(rng.uniform(-6, 6), rng.uniform(-1.5, 1.5))
        cases.append((s, a, rng.uniform(2, 10), MAX_HEADING_RATE if k % 2 else None))
    t0 = time.perf_counter()
    got = [bicycle_step(s, a, 0.1, L, max_heading_rate=r) for s, a, L, r in cases]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for (s, a, L, r), g in zip(cases, got):
        ref = mp_bicycle(s.x, s.y, s.heading, s.speed, a.accel, a.steer, 0.1, L, rate=r)
        for u, v in zip((g.x, g.y, g.heading, g.speed), ref):
            worst = max(worst, abs(u - float(v)) / abs(float(v)))
    dtheta = bicycle_step(KinState(0, 0, 0, 10), Action(0, 0.2), 0.1, 4.0).heading
    ok = worst <= 1e-9 and abs(dtheta - 0.0504193) <= 1e-5 and elapsed < 1.0
    verdict(1, "bicycle model", ok, f"max rel err {worst:.1e}, dtheta {dtheta:.7f}, {elapsed:.3f} s")


def test_c02_visibility_oracle(verdict):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        w = synth.random_world(rng)
        w.present[:] = rng.random(len(w.ids)) > 0.1
        w.present[0] = True
        w.touch()
        egos = np.flatnonzero(w.present)
        for _ in range(5):
            ego = int(rng.choice(egos))
            tilt = float(rng.uniform(-math.pi / 2, math.pi / 2))
            vs = visible_set(int(w.ids[ego]), tilt, w)
            o, r, s = brute_visible(w.pos, w.heading, w.length, w.width, w.present, ego, tilt,
                                    w.map.points, w.map.stop_signs)
            got = (sorted(w.index_of[int(i)] for i in vs.objects), vs.road_points.tolist(), vs.stop_signs.tolist())
            mismatches += got != (o, r, s)
    elapsed = time.perf_counter() - t0
    verdict(2, "visibility oracle", mismatches == 0 and elapsed < 120,
            f"{mismatches} mismatches in 5000 queries, {elapsed:.1f} s")


def test_c03_index_equivalence(verdict):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    bad_bvh = bad_range = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 200))
        lo = rng.uniform(-100, 100, size=(n, 2))
        boxes = np.hstack([lo, lo + rng.exponential(3.0, size=(n, 2))])
        q0 = rng.uniform(-110, 100, 2)
        q = tuple(np.concatenate([q0, q0 + rng.exponential(30.0, 2)]))
        bad_bvh += Bvh(boxes).query(q).tolist() != scan_boxes(boxes, q)
    for _ in range(10_000):
        n = int(rng.integers(1, 200))
        pts = rng.uniform(-100, 100, size=(n, 2))
        if rng.random() < 0.3:
            pts = np.round(pts / 10) * 10  # heavy ties
        q0 = rng.uniform(-110, 100, 2)
        q = tuple(np.concatenate([q0, q0 + rng.exponential(30.0, 2)]))
        bad_range += sorted(RangeTree(pts).query(q).tolist()) != scan_points(pts, q)
    elapsed = time.perf_counter() - t0
    verdict(3, "index equivalence", bad_bvh == 0 and bad_range == 0 and elapsed < 60,
            f"bvh {bad_bvh}, range tree {bad_range} mismatches of 10000 each, {elapsed:.1f} s")


def test_c04_reward_boundaries(verdict):
    goal = Goal(30.0, -5.0, 8.0, 1.0)
    x0 = (0.0, 7.0)
    at_start = dense_reward(KinState(0.0, 7.0, 1.0, 8.0), goal, x0)
    at_goal = dense_reward(KinState(30.0, -5.0, 1.0, 8.0), goal, x0)
    fast = reward_terms(KinState(30.0, -5.0, 1.0, 48.0), goal, x0)[1]
    slow = reward_terms(KinState(30.0, -5.0, 1.0, -32.0), goal, x0)[1]
    ok = at_start == 0.4 and at_goal == 0.6 and fast == 0.0 and slow == 0.0
    verdict(4, "reward boundaries", ok,
            f"start {at_start!r}, goal {at_goal!r}, speed term at dv=+40 {fast!r}, dv=-40 {slow!r}")


def test_c05_goal_predicate(verdict):
    # goal values chosen so each boundary state sits exactly on its tolerance in binary
    g = Goal(10.0, 20.0, 6.0, 0.0)
    eps = 1e-9
    cases = {
        "position -x": (9.0, 20.0, 6.0, 0.0, 9.0 - eps),
        "position +y": (10.0, 21.0, 6.0, 0.0, 21.0 + eps),
        "speed -": (10.0, 20.0, 5.0, 0.0, 5.0 - eps),
        "speed +": (10.0, 20.0, 7.0, 0.0, 7.0 + eps),
        "heading -": (10.0, 20.0, 6.0, -0.3, -0.3 - eps),
        "heading +": (10.0, 20.0, 6.0, 0.3, 0.3 + eps),
    }
    wrong = []
    for name, (x, y, v, h, beyond) in cases.items():
        inside = KinState(x, y, h, v)
        field = {"position -x": "x", "position +y": "y", "speed -": "speed", "speed +": "speed",
                 "heading -": "heading", "heading +": "heading"}[name]
        outside = KinState(**{**inside.__dict__, field: beyond})
        for s, expect in ((inside, True), (outside, False)):
            scalar = goal_achieved(s, g)
            compiled = bool(K.goal_hits(np.array([[s.x, s.y]]), np.array([s.speed]), np.array([s.heading]),
                                        np.array([[g.x, g.y, g.speed, g.heading]]), np.array([0]),
                                        1.0, 1.0, 0.3).size)
            if scalar != expect or compiled != expect:
                wrong.append(name)
    verdict(5, "goal predicate", not wrong, f"6 one-sided boundaries, wrong: {sorted(set(wrong)) or 'none'}")


def test_c06_replay_closure(verdict):
    scn = synth.corridor_scene(seed=6, invalid_prob=0.05)
    cfg = SimConfig(remove_on_goal=False, remove_on_collision=False)
    sim = Simulation(scn, config=cfg)
    Runner({oid: ReplayPolicy() for oid in sim.controlled_ids}).rollout(sim, seed=0)
    exact = True
    for k, o in enumerate(scn.objects):
        v = o.expert.valid
        exact &= np.array_equal(sim.trace_pos[v, k], o.expert.positions[v])
        exact &= np.array_equal(sim.trace_heading[v, k], o.expert.headings[v])
        exact &= np.array_equal(sim.trace_speed[v, k], o.expert.speeds[v])
        exact &= not sim.trace_present[~v, k].any()
    agg = episode_report(sim, "replay", 0).aggregate()
    ok = bool(exact) and agg["ade"] == 0.0 and agg["fde"] == 0.0 and sim.t == N_STEPS - 1
    verdict(6, "replay closure", ok, f"bitwise {bool(exact)} over {sim.t} steps, ADE {agg['ade']}, FDE {agg['fde']}")


def test_c07_performance(verdict, bench_scene):
    single = bench.bench([bench_scene], "single", repeats=5, seed=0)
    big = synth.corridor_scene(n_vehicles=60, seed=7)
    multi = bench.bench([big], "multi", repeats=2, seed=0)
    r2 = multi.to_dict()["linear_r2"]
    ok = single.sps_mean >= 1000 and r2 >= 0.9 and multi.curve[-1]["agents"] == 50
    verdict(7, "performance", ok, f"single-agent {single.sps_mean:.0f} +/- {single.sps_std:.0f} SPS, "
                                  f"multi-agent R^2 {r2:.3f} over 1..50 agents")


def test_c08_infeasibility_audit(verdict, tmp_path):
    cli.main(["synth", "audit", "--out", str(tmp_path / "corpus")])
    code = cli.main(["validate", str(tmp_path / "corpus"), "--out", str(tmp_path / "audit.json")])
    t = json.loads((tmp_path / "audit.json").read_text())["totals"]
    infeasible = t["infeasible_goal"]["rate"]
    collide = t["initial_collision"]["rate"]
    ok = code == 0 and t["n_vehicles"] == 100 and infeasible == 0.03 and collide == 0.02
    verdict(8, "infeasibility audit", ok, f"{t['n_vehicles']} vehicles, infeasible {infeasible:.0%}, "
                                          f"initial collision {collide:.0%}")


def test_c09_interaction_binning(verdict):
    got = {}
    for n in range(7):
        scn = synth.crossing_scene(n, seed=n)
        raw = count_interactions(scn, cap=None)
        capped = count_interactions(scn)
        sim = Simulation(scn, config=SimConfig(remove_on_goal=False, remove_on_collision=False))
        Runner({oid: ReplayPolicy() for oid in sim.controlled_ids}).rollout(sim, seed=0)
        reported = {v.id: v.interactions for v in episode_report(sim).vehicles}
        got[n] = (raw[0], capped[0], reported.get(0))
    ok = all(g == (n, min(n, 3), min(n, 3)) for n, g in got.items())
    verdict(9, "interaction binning", ok, "planted -> (raw, reported): "
            + ", ".join(f"{n}->({g[0]},{g[1]})" for n, g in got.items()))


def _cli(*args, stdin=None):
    return subprocess.run([sys.executable, "-m", "drivecone", *map(str, args)], input=stdin,
                          capture_output=True, check=True).stdout


def test_c10_determinism(verdict, tmp_path):
    out = {}
    for run in ("a", "b"):
        d = tmp_path / run
        _cli("synth", "bench", "--out", d / "bench", "--seed", 5, "--vehicles", 12, "--points", 3000)
        _cli("synth", "audit", "--out", d / "audit")
        _cli("synth", "crossing", "--count", 4, "--out", d / "crossing")
        scn = d / "bench" / "corridor_5.json"
        files = {
            "scenario": scn.read_bytes(),
            "audit corpus": b"".join(p.read_bytes() for p in sorted((d / "audit").glob("*.json"))),
            "crossings": b"".join(p.read_bytes() for p in sorted((d / "crossing").glob("*.json"))),
            "validate": _cli("validate", d / "audit"),
            "rollout replay": _cli("rollout", scn, "--no-removal"),
            "rollout random": _cli("rollout", scn, "--policy", "random", "--seed", 9),
            "rollout constant": _cli("rollout", scn, "--policy", "constant:1,0.1"),
            "rollout stdin": _cli("rollout", scn, "--policy", "stdin",
                                  stdin=b'{"0": [1.0, 0.05, 0.4]}\n' * 80),
            "bench work": _cli("bench", "--scenarios", scn, "--repeats", 2, "--seed", 3, "--no-timing"),
            "bench multi work": _cli("bench", "--scenarios", scn, "--mode", "multi", "--repeats", 1,
                                     "--agents", "1,2,4", "--no-timing"),
        }
        _cli("render", scn, "--ego", 0, "--step", 30, "--out", d / "f.png")
        _cli("render", scn, "--ego", 0, "--step", 30, "--view", "full", "--out", d / "g.png")
        files["render"] = (d / "f.png").read_bytes() + (d / "g.png").read_bytes()
        out[run] = files
    differ = [k for k in out["a"] if out["a"][k] != out["b"][k]]
    verdict(10, "determinism", not differ, f"{len(out['a'])} outputs compared byte for byte, "
                                           f"differing: {differ or 'none'}")
