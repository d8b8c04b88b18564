"""Synthetic scenes: benchmark corridors, planted audit and crossing corpora,
and random visibility worlds."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .scenario import (DT, N_STEPS, ObjectKind, RoadKind, RoadLine, RoadObject, Scenario,
                       Trajectory)
from .world import RoadMap, World

SPACING = 0.5
LANE_OFFSET = 1.75
EDGE_OFFSET = 5.0
CORRIDOR_PITCH = 20.0
MIN_GAP = 12.0
VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 2.0

_TIMES = np.arange(N_STEPS) * DT


def make_object(oid: int, positions: np.ndarray, valid: Optional[np.ndarray] = None,
                kind: ObjectKind = ObjectKind.VEHICLE, length: float = VEHICLE_LENGTH,
                width: float = VEHICLE_WIDTH, headings: Optional[np.ndarray] = None) -> RoadObject:
    """Object following ``positions``; headings and velocities by finite differences."""
    pos = np.asarray(positions, dtype=np.float64).reshape(N_STEPS, 2)
    valid = np.ones(N_STEPS, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    vel = np.gradient(pos, DT, axis=0)
    if headings is None:
        d = np.diff(pos, axis=0)
        head = np.arctan2(d[:, 1], d[:, 0])
        head = np.append(head, head[-1])
    else:
        head = np.asarray(headings, dtype=np.float64)
    pos = pos.copy()
    pos[~valid] = -10000.0
    vel[~valid] = 0.0
    traj = Trajectory(pos, head, vel, valid)
    last = traj.last_valid()
    return RoadObject(oid, kind, width, length, traj,
                      (float(pos[last, 0]), float(pos[last, 1])),
                      float(traj.speeds[last]), float(head[last]))


def straight(x0: float, y0: float, heading: float, speed: float) -> np.ndarray:
    """(91, 2) constant-velocity track."""
    return np.column_stack([x0 + speed * _TIMES * math.cos(heading),
                            y0 + speed * _TIMES * math.sin(heading)])


def _line(x0: float, x1: float, y: float, n: int) -> np.ndarray:
    return np.column_stack([np.linspace(x0, x1, n), np.full(n, y)])


def corridor_roads(n_corridors: int, length: float, n_points: Optional[int] = None,
                   stop_signs_per_corridor: int = 0) -> list[RoadLine]:
    """Straight two-lane corridors stacked along y.

    Each corridor has two road edges, two lane centers and a center road
    line. With ``n_points`` the polylines share that total exactly (stop
    signs included); otherwise they are sampled every 0.5 m.
    """
    n_lines = 5 * n_corridors
    n_signs = stop_signs_per_corridor * n_corridors
    if n_points is None:
        counts = [int(round(length / SPACING)) + 1] * n_lines
    else:
        budget = n_points - n_signs
        if budget < 2 * n_lines:
            raise ValueError("n_points too small for the corridor layout")
        counts = [budget // n_lines + (1 if k < budget % n_lines else 0) for k in range(n_lines)]
    roads = []
    k = 0
    for c in range(n_corridors):
        yc = c * CORRIDOR_PITCH
        layout = [(RoadKind.ROAD_EDGE, -EDGE_OFFSET), (RoadKind.LANE_CENTER, -LANE_OFFSET),
                  (RoadKind.ROAD_LINE, 0.0), (RoadKind.LANE_CENTER, LANE_OFFSET),
                  (RoadKind.ROAD_EDGE, EDGE_OFFSET)]
        for kind, dy in layout:
            roads.append(RoadLine(kind, _line(0.0, length, yc + dy, counts[k])))
            k += 1
        for s in range(stop_signs_per_corridor):
            x = length * (s + 1) / (stop_signs_per_corridor + 1)
            roads.append(RoadLine(RoadKind.STOP_SIGN, [(x, yc + EDGE_OFFSET - 0.5)]))
    return roads


def corridor_scene(n_vehicles: int = 30, n_points: int = 16000, seed: int = 0,
                   n_corridors: int = 4, length: float = 400.0, stop_signs_per_corridor: int = 2,
                   speed_range: tuple[float, float] = (4.0, 10.0), invalid_prob: float = 0.0,
                   name: Optional[str] = None) -> Scenario:
    """Collision-free traffic in straight corridors.

    Lanes drive in opposite directions at a per-lane constant speed, so
    vehicles in the same lane keep their gaps (at least 12 m apart).
    ``invalid_prob`` drops random steps after the first second to exercise
    gaps in recorded data.
    """
    rng = np.random.default_rng(seed)
    roads = corridor_roads(n_corridors, length, n_points, stop_signs_per_corridor)
    travel = speed_range[1] * _TIMES[-1]
    margin = VEHICLE_LENGTH
    slots_per_lane = int((length - travel - 2 * margin) // MIN_GAP) + 1
    lanes = [(c, side) for c in range(n_corridors) for side in (-1, 1)]
    if n_vehicles > slots_per_lane * len(lanes):
        raise ValueError("too many vehicles for the corridor layout")
    lane_speed = rng.uniform(*speed_range, size=len(lanes))
    picks = rng.choice(slots_per_lane * len(lanes), size=n_vehicles, replace=False)
    objects = []
    for oid, p in enumerate(sorted(picks.tolist())):
        lane, slot = divmod(p, slots_per_lane)
        c, side = lanes[lane]
        y = c * CORRIDOR_PITCH + side * LANE_OFFSET
        s = margin + slot * MIN_GAP
        v = float(lane_speed[lane])
        if side < 0:
            track, heading = straight(s, y, 0.0, v), 0.0
        else:
            track, heading = straight(length - s, y, math.pi, v), math.pi
        valid = np.ones(N_STEPS, dtype=bool)
        if invalid_prob > 0:
            valid[11:] = rng.random(N_STEPS - 11) >= invalid_prob
            valid[-1] = True
        objects.append(make_object(oid, track, valid, headings=np.full(N_STEPS, heading)))
    return Scenario(name or f"corridor_{seed}", tuple(objects), tuple(roads), DT)


def audit_corpus(n_scenes: int = 5, vehicles_per_scene: int = 20, n_infeasible: int = 3,
                 n_initial_collision: int = 2, seed: int = 0) -> list[Scenario]:
    """Corridor scenes with planted bad vehicles.

    Infeasible vehicles drift sideways so the footprint ends centered on a
    road edge. Initially colliding vehicles are parked across their lane with
    the rear bumper 0.1 m over the edge, then pull 1 m forward; the length
    shrink used by the feasibility check keeps their goal feasible.
    """
    rng = np.random.default_rng(seed)
    total = n_scenes * vehicles_per_scene
    bad = rng.choice(total, size=n_infeasible + n_initial_collision, replace=False)
    plant = {int(b): ("infeasible" if k < n_infeasible else "collide") for k, b in enumerate(bad)}
    scenes = []
    for s in range(n_scenes):
        base = corridor_scene(vehicles_per_scene, n_points=None, seed=seed * 1000 + s,
                              n_corridors=3, stop_signs_per_corridor=0, name=f"audit_{s:03d}")
        objs = list(base.objects)
        for k, obj in enumerate(objs):
            what = plant.get(s * vehicles_per_scene + k)
            if what is None:
                continue
            pos = obj.expert.positions.copy()
            lane_y = pos[0, 1]
            corridor_y = round(lane_y / CORRIDOR_PITCH) * CORRIDOR_PITCH
            side = 1.0 if lane_y > corridor_y else -1.0
            edge_y = corridor_y + side * EDGE_OFFSET
            ramp = np.clip((_TIMES - 1.0) / 7.0, 0.0, 1.0)
            if what == "infeasible":
                pos[:, 1] = lane_y + (edge_y - lane_y) * ramp
                objs[k] = make_object(obj.id, pos)
            else:
                start = edge_y - side * (0.5 * VEHICLE_LENGTH - 0.1)
                pos[:, 0] = pos[0, 0]
                pos[:, 1] = start - side * ramp
                objs[k] = make_object(obj.id, pos, headings=np.full(N_STEPS, -side * 0.5 * math.pi))
        scenes.append(Scenario(base.name, tuple(objs), base.roads, DT))
    return scenes


def zigzag(x0: float, x1: float, y_center: float, amplitude: float, n_crossings: int) -> np.ndarray:
    """(91, 2) track crossing the line y = y_center exactly ``n_crossings`` times."""
    # vertices alternate sides; each leg crosses the center line once
    n_vertices = n_crossings + 1
    vx = np.linspace(x0, x1, n_vertices)
    vy = y_center + amplitude * np.where(np.arange(n_vertices) % 2 == 0, -1.0, 1.0)
    u = np.linspace(0.0, n_vertices - 1, N_STEPS)
    return np.column_stack([np.interp(u, np.arange(n_vertices), vx),
                            np.interp(u, np.arange(n_vertices), vy)])


def crossing_scene(n_crossings: int, seed: int = 0, name: Optional[str] = None) -> Scenario:
    """A straight vehicle (id 0) and a zigzagging one (id 1) with planted crossings,
    plus a parallel vehicle (id 2) that crosses neither."""
    rng = np.random.default_rng(seed)
    amp = float(rng.uniform(2.0, 6.0))
    a = straight(0.0, 0.0, 0.0, 10.0)
    b = zigzag(5.0, 85.0, 0.0, amp, n_crossings) if n_crossings else straight(0.0, amp, 0.0, 9.0)
    c = straight(0.0, 40.0, 0.0, 8.0)
    roads = (RoadLine(RoadKind.LANE_CENTER, _line(0.0, 100.0, 0.0, 201)),)
    objs = (make_object(0, a), make_object(1, b), make_object(2, c))
    return Scenario(name or f"crossing_{n_crossings}", objs, roads, DT)


def random_world(rng: np.random.Generator, n_objects: Optional[int] = None,
                 n_points: Optional[int] = None, extent: float = 100.0,
                 n_stop_signs: int = 5) -> World:
    """Random boxes and scattered road points for visibility checks."""
    n_objects = int(rng.integers(1, 41)) if n_objects is None else n_objects
    n_points = int(rng.integers(0, 20001)) if n_points is None else n_points
    pts = rng.uniform(-extent, extent, size=(n_points, 2))
    kinds = rng.integers(0, 7, size=n_points)
    stops = rng.uniform(-extent, extent, size=(n_stop_signs, 2))
    road_map = RoadMap.from_points(pts, kinds, stops)
    pos = rng.uniform(-0.6 * extent, 0.6 * extent, size=(n_objects, 2))
    heading = rng.uniform(-math.pi, math.pi, size=n_objects)
    length = rng.uniform(1.0, 6.0, size=n_objects)
    width = rng.uniform(0.5, 3.0, size=n_objects)
    return World.from_arrays(road_map, pos, heading, length, width,
                             speed=rng.uniform(0.0, 15.0, size=n_objects),
                             kinds=rng.integers(0, 3, size=n_objects))
