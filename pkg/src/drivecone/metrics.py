"""Per-vehicle scoring: goal and collision rates, displacement errors, and
the trajectory-crossing count used as an interaction proxy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .geom import Segment, Vec2, segment_intersect
from .scenario import Scenario

INTERACTION_CAP = 3
_SAME_POINT = 1e-9


@dataclass
class VehicleReport:
    id: int
    goal: bool
    collision: str  # "none" | "vehicle" | "road_edge"
    ade: Optional[float]
    fde: Optional[float]
    interactions: int


@dataclass
class EpisodeReport:
    scenario: str
    vehicles: list[VehicleReport]
    removal: bool = True
    policy: str = ""
    seed: Optional[int] = None

    def aggregate(self) -> dict:
        return aggregate(self.vehicles)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "policy": self.policy,
            "seed": self.seed,
            "removal": self.removal,
            "vehicles": [asdict(v) for v in self.vehicles],
            "aggregate": self.aggregate(),
            "by_interactions": rates_by_interactions(self.vehicles),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def aggregate(reports: Sequence[VehicleReport]) -> dict:
    """Per-vehicle goal and collision fractions (not per-scene)."""
    n = len(reports)
    if n == 0:
        raise ValueError("aggregate needs at least one vehicle")
    ade = [r.ade for r in reports if r.ade is not None]
    fde = [r.fde for r in reports if r.fde is not None]
    return {
        "n_vehicles": n,
        "goal_rate": sum(r.goal for r in reports) / n,
        "collision_rate": sum(r.collision != "none" for r in reports) / n,
        "vehicle_collision_rate": sum(r.collision == "vehicle" for r in reports) / n,
        "road_edge_collision_rate": sum(r.collision == "road_edge" for r in reports) / n,
        "ade": float(np.mean(ade)) if ade else None,
        "fde": float(np.mean(fde)) if fde else None,
    }


def rates_by_interactions(reports: Sequence[VehicleReport]) -> dict:
    out = {}
    for k in range(INTERACTION_CAP + 1):
        rows = [r for r in reports if min(r.interactions, INTERACTION_CAP) == k]
        if rows:
            out[str(k)] = {"n_vehicles": len(rows),
                           "goal_rate": sum(r.goal for r in rows) / len(rows),
                           "collision_rate": sum(r.collision != "none" for r in rows) / len(rows)}
    return out


def displacement(agent: np.ndarray, expert: np.ndarray,
                 valid: Optional[np.ndarray] = None) -> Optional[tuple[float, float]]:
    """(ADE, FDE) over the steps where the expert state is valid.

    FDE is taken at the last valid expert step. Returns None when no step
    is valid.
    """
    agent = np.asarray(agent, dtype=np.float64)
    expert = np.asarray(expert, dtype=np.float64)
    valid = np.ones(len(expert), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return None
    err = np.hypot(*(agent[idx] - expert[idx]).T)
    return float(err.mean()), float(err[-1])


def trajectory_segments(positions: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """(k, 4) segments joining consecutive valid steps; gaps break the path."""
    keep = valid[:-1] & valid[1:]
    return np.hstack([positions[:-1], positions[1:]])[keep]


def _crossings(a: np.ndarray, b: np.ndarray) -> int:
    if len(a) == 0 or len(b) == 0:
        return 0
    a_lo = np.minimum(a[:, :2], a[:, 2:])
    a_hi = np.maximum(a[:, :2], a[:, 2:])
    b_lo = np.minimum(b[:, :2], b[:, 2:])
    b_hi = np.maximum(b[:, :2], b[:, 2:])
    pad = 1e-9
    near = ((a_lo[:, None, 0] <= b_hi[None, :, 0] + pad) & (b_lo[None, :, 0] <= a_hi[:, None, 0] + pad)
            & (a_lo[:, None, 1] <= b_hi[None, :, 1] + pad) & (b_lo[None, :, 1] <= a_hi[:, None, 1] + pad))
    points: list[Vec2] = []
    for i, j in zip(*np.nonzero(near)):
        p = segment_intersect(Segment(Vec2(*a[i, :2]), Vec2(*a[i, 2:])),
                              Segment(Vec2(*b[j, :2]), Vec2(*b[j, 2:])))
        # a crossing through a shared vertex shows up on both adjacent segments
        if p is not None and all((p - q).norm() > _SAME_POINT for q in points):
            points.append(p)
    return len(points)


def count_interactions(scenario: Scenario, ids: Optional[Iterable[int]] = None,
                       cap: Optional[int] = INTERACTION_CAP) -> dict[int, int]:
    """Crossings of each vehicle's recorded path with every other vehicle's.

    Counts above ``cap`` are reported as ``cap``; pass ``cap=None`` for raw
    counts.
    """
    vehicles = scenario.vehicles
    segs = {v.id: trajectory_segments(v.expert.positions, v.expert.valid) for v in vehicles}
    counts = {v.id: 0 for v in vehicles}
    vids = [v.id for v in vehicles]
    for x, i in enumerate(vids):
        for j in vids[x + 1:]:
            c = _crossings(segs[i], segs[j])
            counts[i] += c
            counts[j] += c
    if ids is not None:
        counts = {i: counts[i] for i in ids}
    if cap is not None:
        counts = {i: min(c, cap) for i, c in counts.items()}
    return counts


def episode_report(sim, policy: str = "", seed: Optional[int] = None,
                   ids: Optional[Sequence[int]] = None) -> EpisodeReport:
    """Score a finished episode for its controlled vehicles (or ``ids``)."""
    ids = list(sim.controlled_ids if ids is None else ids)
    inter = count_interactions(sim.scenario, ids=[i for i in ids if sim.scenario.object(i).is_vehicle])
    w0, end = sim.config.warmup_steps, sim.config.end_step
    steps = np.arange(w0 + 1, end + 1)
    rows = []
    for oid in ids:
        i = sim.world.index_of[oid]
        obj = sim.scenario.object(oid)
        present = sim.trace_present[:, i]
        pos = sim.trace_pos[:, i].copy()
        # hold the last seen position through absences
        last = None
        for t in range(len(pos)):
            if present[t]:
                last = pos[t].copy()
            elif last is not None:
                pos[t] = last
        valid = obj.expert.valid[steps] & ~np.isnan(pos[steps, 0])
        disp = displacement(pos[steps], obj.expert.positions[steps], valid)
        snap = sim.snapshot(oid)
        rows.append(VehicleReport(
            id=int(oid),
            goal=snap.goal_achieved,
            collision=snap.collided.label,
            ade=None if disp is None else disp[0],
            fde=None if disp is None else disp[1],
            interactions=inter.get(oid, 0),
        ))
    removal = sim.config.remove_on_goal or sim.config.remove_on_collision
    return EpisodeReport(sim.scenario.name, rows, removal=removal, policy=policy, seed=seed)
