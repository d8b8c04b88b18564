"""Steps-per-second measurement.

Single-agent mode: at every step a random present vehicle is controlled,
everything else replays, its observation is built, a random grid action is
applied and the world advances. Multi-agent mode: a fixed set of k vehicles
is controlled, all their observations are built, then the world advances;
per-step time is recorded for each k.

One untimed episode runs first so compilation and cache loading stay out
of the numbers. Timing fields are wall-clock and vary run to run. Everything under the
``work`` keys (what was stepped and observed) is a function of the seed.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import ActionGrid
from .scenario import N_STEPS, Disposition, Scenario, select_controlled
from .sim import SimConfig, Simulation
from .world import RoadMap

BENCH_STEPS = N_STEPS - 1
DEFAULT_AGENT_COUNTS = (1, 5, 10, 20, 30, 40, 50)


def _bench_config() -> SimConfig:
    return SimConfig(warmup_steps=0, horizon=BENCH_STEPS, remove_on_goal=False, remove_on_collision=False)


@dataclass
class RunTiming:
    steps: int
    seconds: float
    digest: str  # hash of the agents and actions chosen

    @property
    def sps(self) -> float:
        return self.steps / self.seconds if self.seconds > 0 else float("inf")


def single_agent_run(scn: Scenario, seed: int, road_map: Optional[RoadMap] = None,
                     grid: ActionGrid = ActionGrid()) -> RunTiming:
    disp = select_controlled(scn, max_controlled=0)
    disp = {k: (Disposition.REMOVED if v is Disposition.REMOVED else Disposition.EXPERT_REPLAY)
            for k, v in disp.items()}
    sim = Simulation(scn, disp, config=_bench_config(), road_map=road_map)
    sim.reset(seed)
    rng = np.random.default_rng(seed)
    vehicle = sim._is_vehicle
    n_actions = len(grid)
    chosen = np.full((BENCH_STEPS, 2), -1, dtype=np.int64)
    t0 = time.perf_counter()
    for t in range(BENCH_STEPS):
        pool = np.flatnonzero(sim.world.present & vehicle & sim.alive)
        if pool.size == 0:
            sim.set_controlled(())
            sim.advance({})
            continue
        i = int(pool[rng.integers(pool.size)])
        oid = int(sim.world.ids[i])
        sim.set_controlled((oid,))
        sim.observe(oid)
        a = int(rng.integers(n_actions))
        sim.advance({oid: grid.action(a)})
        chosen[t] = (oid, a)
    dt = time.perf_counter() - t0
    return RunTiming(BENCH_STEPS, dt, hashlib.sha256(chosen.tobytes()).hexdigest()[:16])


def always_valid_vehicles(scn: Scenario) -> list[int]:
    return [v.id for v in scn.vehicles if v.expert.valid.all()]


def multi_agent_run(scn: Scenario, n_agents: int, seed: int, road_map: Optional[RoadMap] = None,
                    grid: ActionGrid = ActionGrid()) -> RunTiming:
    pool = always_valid_vehicles(scn)
    if n_agents > len(pool):
        raise ValueError(f"scenario has only {len(pool)} vehicles valid throughout")
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(np.array(pool), size=n_agents, replace=False).tolist())
    disp = {o.id: (Disposition.CONTROLLED if o.id in picked else Disposition.EXPERT_REPLAY)
            for o in scn.objects}
    sim = Simulation(scn, disp, config=_bench_config(), road_map=road_map)
    sim.reset(seed)
    n_actions = len(grid)
    record = np.empty((BENCH_STEPS, n_agents), dtype=np.int64)
    t0 = time.perf_counter()
    for t in range(BENCH_STEPS):
        ids = sim.active_ids
        for oid in ids:
            sim.observe(oid)
        acts = rng.integers(n_actions, size=len(ids))
        sim.advance({oid: grid.action(int(a)) for oid, a in zip(ids, acts)})
        record[t, :len(ids)] = acts
    dt = time.perf_counter() - t0
    return RunTiming(BENCH_STEPS, dt, hashlib.sha256(record.tobytes()).hexdigest()[:16])


def linear_r2(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of a least-squares line through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 3:
        raise ValueError("need at least three points for a meaningful fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0


@dataclass
class BenchResult:
    mode: str
    repeats: int
    seed: int
    scenarios: list[str]
    repeat_sps: list[float] = field(default_factory=list)
    digests: list[str] = field(default_factory=list)
    curve: list[dict] = field(default_factory=list)  # multi mode: per agent count
    warmup_runs: int = 1

    @property
    def sps_mean(self) -> float:
        return float(np.mean(self.repeat_sps))

    @property
    def sps_std(self) -> float:
        return float(np.std(self.repeat_sps))

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "mode": self.mode,
            "repeats": self.repeats,
            "seed": self.seed,
            "scenarios": self.scenarios,
            "warmup_runs": self.warmup_runs,
            "work": {"digests": self.digests,
                     "agent_counts": [c["agents"] for c in self.curve]},
        }
        if timing:
            out["sps_mean"] = self.sps_mean
            out["sps_std"] = self.sps_std
            out["repeat_sps"] = self.repeat_sps
            if self.curve:
                out["curve"] = self.curve
                xs = [c["agents"] for c in self.curve]
                if len(xs) >= 3:
                    out["linear_r2"] = linear_r2(xs, [c["step_seconds"] for c in self.curve])
        return out


def bench(scenarios: Sequence[Scenario], mode: str = "single", repeats: int = 5, seed: int = 0,
          agent_counts: Sequence[int] = DEFAULT_AGENT_COUNTS, warmup_runs: int = 1) -> BenchResult:
    """Run the benchmark; repeat r uses seed ``seed + r`` and every scenario."""
    if not scenarios:
        raise ValueError("no scenarios to benchmark")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if mode not in ("single", "multi"):
        raise ValueError(f"unknown mode {mode!r}")
    maps = [RoadMap.from_scenario(s) for s in scenarios]
    res = BenchResult(mode, repeats, seed, [s.name for s in scenarios], warmup_runs=warmup_runs)
    if mode == "single":
        for _ in range(warmup_runs):
            single_agent_run(scenarios[0], seed, maps[0])
        for r in range(repeats):
            runs = [single_agent_run(s, seed + r, m) for s, m in zip(scenarios, maps)]
            res.repeat_sps.append(sum(x.steps for x in runs) / sum(x.seconds for x in runs))
            res.digests.extend(x.digest for x in runs)
        return res

    limit = min(len(always_valid_vehicles(s)) for s in scenarios)
    counts = [k for k in agent_counts if 1 <= k <= limit]
    if not counts:
        raise ValueError("no scenario has enough vehicles for the requested agent counts")
    per_count: dict[int, list[float]] = {k: [] for k in counts}
    for _ in range(warmup_runs):
        multi_agent_run(scenarios[0], counts[0], seed, maps[0])
    for r in range(repeats):
        steps = secs = 0.0
        for k in counts:
            runs = [multi_agent_run(s, k, seed + r, m) for s, m in zip(scenarios, maps)]
            per_count[k].append(sum(x.seconds for x in runs) / sum(x.steps for x in runs))
            res.digests.extend(x.digest for x in runs)
            steps += sum(x.steps * k for x in runs)
            secs += sum(x.seconds for x in runs)
        res.repeat_sps.append(steps / secs)
    res.curve = [{"agents": k, "step_seconds": float(np.mean(v)), "step_seconds_std": float(np.std(v))}
                 for k, v in per_count.items()]
    return res
