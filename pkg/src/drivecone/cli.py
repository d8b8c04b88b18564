"""Command line entry point: bench, validate, rollout, render, synth."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import bench as benchmod
from . import synth
from .config import EnvConfig, benchmark_config, load_config
from .dynamics import Action
from .metrics import episode_report
from .obs import rasterize, save_png
from .scenario import (Disposition, ScenarioError, audit, load_scenario, load_scenario_file,
                       save_scenario_file)
from .sim import REPLAY, ConstantPolicy, FunctionPolicy, RandomPolicy, ReplayPolicy, Runner, Simulation
from .world import World

EXIT_USAGE = 2
EXIT_INVALID = 3


class UsageError(Exception):
    pass


def _dump(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _scenario_files(path: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise UsageError(f"no scenario files in {p}")
        return files
    if not p.exists():
        raise UsageError(f"{p} does not exist")
    return [p]


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _env(args) -> EnvConfig:
    return load_config(args.config) if getattr(args, "config", None) else benchmark_config()


# ------------------------------------------------------------------ bench

def cmd_bench(args) -> int:
    files = _scenario_files(args.scenarios)
    scenarios = [load_scenario_file(f) for f in files]
    counts = [int(x) for x in args.agents.split(",")] if args.agents else benchmod.DEFAULT_AGENT_COUNTS
    if args.workers > 1 and len(scenarios) > 1:
        jobs = [(s, args.mode, args.repeats, args.seed, tuple(counts), args.warmup) for s in scenarios]
        parts = _map(_bench_one, jobs, args.workers)
        doc = _merge_bench(parts, args)
    else:
        res = benchmod.bench(scenarios, args.mode, args.repeats, args.seed, counts, args.warmup)
        doc = res.to_dict(timing=not args.no_timing)
    _dump(doc, args.out)
    return 0


def _bench_one(job) -> dict:
    scn, mode, repeats, seed, counts, warmup = job
    return benchmod.bench([scn], mode, repeats, seed, counts, warmup).to_dict()


def _merge_bench(parts: list[dict], args) -> dict:
    # each worker timed its own scenario; combine per-repeat rates by averaging
    sps = np.mean([p["repeat_sps"] for p in parts], axis=0)
    doc = {
        "mode": args.mode,
        "repeats": args.repeats,
        "seed": args.seed,
        "scenarios": [s for p in parts for s in p["scenarios"]],
        "warmup_runs": args.warmup,
        "work": {"digests": [d for p in parts for d in p["work"]["digests"]],
                 "agent_counts": parts[0]["work"]["agent_counts"]},
    }
    if not args.no_timing:
        doc["repeat_sps"] = sps.tolist()
        doc["sps_mean"] = float(sps.mean())
        doc["sps_std"] = float(sps.std())
        doc["per_scenario"] = parts
    return doc


# --------------------------------------------------------------- validate

def _validate_one(path: Path) -> dict:
    try:
        scn = load_scenario(path.read_bytes())
    except ScenarioError as e:
        return {"file": path.name, "ok": False, "error": str(e)}
    rep = audit(scn).to_dict()
    rep.update(file=path.name, ok=True)
    return rep


def cmd_validate(args) -> int:
    files = _scenario_files(args.path)
    rows = _map(_validate_one, files, args.workers)
    good = [r for r in rows if r["ok"]]
    n = sum(r["n_vehicles"] for r in good)
    totals = {"files": len(rows), "invalid_files": len(rows) - len(good), "n_vehicles": n}
    for key in ("infeasible_goal", "initial_collision", "invalid_at_start"):
        c = sum(r[key]["count"] for r in good)
        totals[key] = {"count": c, "rate": c / n if n else 0.0}
    _dump({"files": rows, "totals": totals}, args.out)
    for r in rows:
        if not r["ok"]:
            print(f"{r['file']}: {r['error']}", file=sys.stderr)
    return EXIT_INVALID if len(good) < len(rows) else 0


# ---------------------------------------------------------------- rollout

def parse_policy(name: str, seed: int, env: EnvConfig):
    """Policy factory for ``--policy``; returns a callable id -> policy."""
    if name == "replay":
        return lambda oid: ReplayPolicy()
    if name == "random":
        # one generator per vehicle, derived from the run seed and the id
        return lambda oid: RandomPolicy(env.actions, seed=np.random.SeedSequence([seed, oid]))
    if name.startswith("constant"):
        try:
            _, spec = name.split(":", 1)
            accel, steer = (float(v) for v in spec.split(","))
        except ValueError:
            raise UsageError("constant policy is written constant:ACCEL,STEER") from None
        return lambda oid: ConstantPolicy(accel, steer)
    if name == "stdin":
        stream = _StdinActions(sys.stdin)
        return lambda oid: FunctionPolicy(stream.action)
    raise UsageError(f"unknown policy {name!r} (replay, random, constant:A,D, stdin)")


class _StdinActions:
    """Actions from JSON lines, one line per control step.

    Each line maps vehicle id to ``[accel, steer]``, ``[accel, steer, tilt]``
    or ``"replay"``. Vehicles missing from a line replay for that step.
    """

    def __init__(self, stream):
        self.stream = stream
        self.t = None
        self.line: dict = {}

    def action(self, oid, observation, sim):
        if self.t != sim.t:
            raw = self.stream.readline()
            self.line = json.loads(raw) if raw.strip() else {}
            self.t = sim.t
        a = self.line.get(str(oid), "replay")
        if a == "replay":
            return REPLAY
        return Action(*(float(v) for v in a))


def run_rollout(path: Path, policy: str, seed: int, removal: bool, env: EnvConfig) -> dict:
    scn = load_scenario_file(path)
    cfg = env.sim
    if not removal:
        cfg = type(cfg)(**{**cfg.__dict__, "remove_on_goal": False, "remove_on_collision": False})
    sim = Simulation(scn, config=cfg, view=env.view, layout=env.layout, seed=seed)
    make = parse_policy(policy, seed, env)
    runner = Runner({oid: make(oid) for oid in sim.controlled_ids})
    rewards = runner.rollout(sim, seed=seed)
    if not sim.controlled_ids:
        return {"scenario": scn.name, "policy": policy, "seed": seed, "removal": removal,
                "vehicles": [], "aggregate": None, "note": "no controllable vehicles"}
    doc = episode_report(sim, policy=policy, seed=seed).to_dict()
    for row in doc["vehicles"]:
        row["reward"] = rewards[row["id"]]
    doc["disposition"] = {str(k): v.value for k, v in sorted(sim.disposition.items())}
    return doc


def _rollout_job(job) -> dict:
    return run_rollout(*job)


def cmd_rollout(args) -> int:
    files = _scenario_files(args.scenario)
    env = _env(args)
    parse_policy(args.policy, args.seed, env) if args.policy != "stdin" else None
    if args.policy == "stdin" and len(files) > 1:
        raise UsageError("the stdin policy drives a single scenario")
    jobs = [(f, args.policy, args.seed, not args.no_removal, env) for f in files]
    docs = _map(_rollout_job, jobs, 1 if args.policy == "stdin" else args.workers)
    _dump(docs[0] if len(docs) == 1 else {"episodes": docs}, args.out)
    return 0


# ----------------------------------------------------------------- render

def world_at(scn, step: int) -> World:
    """World holding every object's recorded state at ``step``."""
    w = World.from_scenario(scn)
    for k, o in enumerate(scn.objects):
        if o.expert.valid[step]:
            w.pos[k] = o.expert.positions[step]
            w.heading[k] = o.expert.headings[step]
            w.speed[k] = o.expert.speeds[step]
            w.present[k] = True
    w.touch()
    return w


def cmd_render(args) -> int:
    scn = load_scenario_file(args.scenario)
    if not 0 <= args.step < len(scn.objects[0].expert.valid if scn.objects else [0]):
        raise UsageError(f"step {args.step} out of range")
    w = world_at(scn, args.step)
    if args.ego not in w.index_of or not w.present[w.index_of[args.ego]]:
        raise UsageError(f"object {args.ego} is not valid at step {args.step}")
    env = _env(args)
    img = rasterize(args.ego, w, px=args.px, meters_per_px=args.scale, tilt=args.tilt,
                    view=args.view, cfg=env.view)
    save_png(img, args.out)
    return 0


# ------------------------------------------------------------------ synth

def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "bench":
        scenes = [synth.corridor_scene(args.vehicles, args.points, seed=args.seed + k) for k in range(args.count)]
    elif args.kind == "audit":
        scenes = synth.audit_corpus(seed=args.seed)
    else:
        scenes = [synth.crossing_scene(k, seed=args.seed) for k in range(args.count)]
    for s in scenes:
        save_scenario_file(s, out / f"{s.name}.json")
    return 0


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drivecone", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="measure steps per second")
    b.add_argument("--scenarios", required=True, help="scenario file or directory")
    b.add_argument("--mode", choices=("single", "multi"), default="single")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--agents", help="comma-separated agent counts for multi mode")
    b.add_argument("--warmup", type=int, default=1, help="untimed episodes before measuring")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    b.add_argument("--out")
    b.set_defaults(fn=cmd_bench)

    v = sub.add_parser("validate", help="schema check and vehicle audit")
    v.add_argument("path", help="scenario file or directory")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out")
    v.set_defaults(fn=cmd_validate)

    r = sub.add_parser("rollout", help="run an episode with a built-in policy")
    r.add_argument("scenario", help="scenario file or directory")
    r.add_argument("--policy", default="replay", help="replay | random | constant:A,D | stdin")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--no-removal", action="store_true", help="keep finished vehicles (needed for ADE/FDE)")
    r.add_argument("--config", help="config JSON (default: benchmark preset)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_rollout)

    g = sub.add_parser("render", help="draw a top-down frame")
    g.add_argument("scenario")
    g.add_argument("--step", type=int, default=0)
    g.add_argument("--ego", type=int, required=True)
    g.add_argument("--view", choices=("cone", "full"), default="cone")
    g.add_argument("--tilt", type=float, default=0.0)
    g.add_argument("--px", type=int, default=256)
    g.add_argument("--scale", type=float, default=0.5, help="meters per pixel")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_render)

    s = sub.add_parser("synth", help="write synthetic scenario corpora")
    s.add_argument("kind", choices=("bench", "audit", "crossing"))
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--vehicles", type=int, default=30)
    s.add_argument("--points", type=int, default=16000)
    s.set_defaults(fn=cmd_synth)
    return p


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        return args.fn(args)
    except UsageError as e:
        parser.error(str(e))
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
