"""Scenario data model, JSON file format, and vehicle filtering rules.

A scenario is one 9 second snippet sampled at 10 Hz: 91 recorded states per
road object plus static map polylines. Loading validates everything up
front so the rest of the package can trust the arrays it receives.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence, Union

import jsonschema
import numpy as np

from . import _kernels as K
from .geom import min_angle
from .spatial import Bvh

N_STEPS = 91
DT = 0.1
INVALID_SENTINEL = -10000.0

# shrink applied to a vehicle's footprint when auditing its expert path
INFEASIBLE_WIDTH_SHRINK = 0.1
INFEASIBLE_LENGTH_SHRINK = 0.3
MOVING_SPEED = 0.05
AT_GOAL_DIST = 0.2
_GOAL_TOL = 1e-6


class ScenarioError(ValueError):
    """Base class for rejected scenario files."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(ScenarioError):
    pass


class TrajectoryLengthError(ScenarioError):
    pass


class UnsupportedElementError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


class RoadKind(enum.Enum):
    LANE_CENTER = "lane"
    ROAD_LINE = "road_line"
    ROAD_EDGE = "road_edge"
    STOP_SIGN = "stop_sign"
    CROSSWALK = "crosswalk"
    SPEED_BUMP = "speed_bump"
    UNKNOWN = "unknown"

    @property
    def index(self) -> int:
        return _ROAD_ORDER.index(self)


_ROAD_ORDER = list(RoadKind)
N_ROAD_KINDS = len(_ROAD_ORDER)
_UNSUPPORTED_ROAD = {"traffic_light", "traffic_signal", "signal"}


class ObjectKind(enum.Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"

    @property
    def index(self) -> int:
        return _OBJECT_ORDER.index(self)


_OBJECT_ORDER = list(ObjectKind)


class Disposition(enum.Enum):
    CONTROLLED = "controlled"
    EXPERT_REPLAY = "expert_replay"
    REMOVED = "removed"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RoadLine:
    kind: RoadKind
    points: np.ndarray  # (n, 2)

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _frozen(np.asarray(self.points, dtype=np.float64).reshape(-1, 2)))


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray  # (91, 2)
    headings: np.ndarray  # (91,)
    velocities: np.ndarray  # (91, 2)
    valid: np.ndarray  # (91,) bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", _frozen(np.asarray(self.positions, dtype=np.float64)))
        object.__setattr__(self, "headings", _frozen(np.asarray(self.headings, dtype=np.float64)))
        object.__setattr__(self, "velocities", _frozen(np.asarray(self.velocities, dtype=np.float64)))
        object.__setattr__(self, "valid", _frozen(np.asarray(self.valid, dtype=bool)))

    @property
    def speeds(self) -> np.ndarray:
        return np.hypot(self.velocities[:, 0], self.velocities[:, 1])

    def last_valid(self) -> int:
        idx = np.flatnonzero(self.valid)
        return int(idx[-1]) if idx.size else -1


@dataclass(frozen=True)
class RoadObject:
    id: int
    kind: ObjectKind
    width: float
    length: float
    expert: Trajectory
    goal_position: tuple[float, float]
    goal_speed: float
    goal_heading: float

    @property
    def is_vehicle(self) -> bool:
        return self.kind is ObjectKind.VEHICLE


@dataclass(frozen=True)
class Scenario:
    name: str
    objects: tuple[RoadObject, ...]
    roads: tuple[RoadLine, ...]
    dt: float = DT

    def object(self, oid: int) -> RoadObject:
        return self._by_id[oid]

    @cached_property
    def _by_id(self) -> dict[int, RoadObject]:
        return {o.id: o for o in self.objects}

    @property
    def vehicles(self) -> list[RoadObject]:
        return [o for o in self.objects if o.is_vehicle]

    @cached_property
    def road_edge_segments(self) -> np.ndarray:
        """(k, 4) non-degenerate road-edge segments."""
        segs = []
        for r in self.roads:
            if r.kind is RoadKind.ROAD_EDGE and len(r.points) > 1:
                p = r.points
                s = np.hstack([p[:-1], p[1:]])
                keep = np.any(s[:, :2] != s[:, 2:], axis=1)
                segs.append(s[keep])
        if not segs:
            return np.empty((0, 4))
        out = np.vstack(segs)
        out.setflags(write=False)
        return out

    @cached_property
    def road_edge_bvh(self) -> Bvh:
        return Bvh(K.segment_aabbs(np.ascontiguousarray(self.road_edge_segments)))


# ---------------------------------------------------------------- file format

_XY = {
    "type": "object",
    "required": ["x", "y"],
    "properties": {"x": {"type": "number"}, "y": {"type": "number"}},
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["name", "dt", "objects", "roads"],
    "properties": {
        "name": {"type": "string"},
        "dt": {"type": "number"},
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "type", "width", "length", "goalPosition", "goalSpeed",
                             "goalHeading", "position", "heading", "velocity", "valid"],
                "properties": {
                    "id": {"type": "integer"},
                    "type": {"enum": [k.value for k in ObjectKind]},
                    "width": {"type": "number"},
                    "length": {"type": "number"},
                    "goalPosition": _XY,
                    "goalSpeed": {"type": "number"},
                    "goalHeading": {"type": "number"},
                    "position": {"type": "array", "items": _XY},
                    "heading": {"type": "array", "items": {"type": "number"}},
                    "velocity": {"type": "array", "items": _XY},
                    "valid": {"type": "array", "items": {"type": "boolean"}},
                },
            },
        },
        "roads": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry"],
                "properties": {
                    "type": {"type": "string"},
                    "geometry": {"type": "array", "items": _XY},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft7Validator(SCENARIO_SCHEMA)


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _xy_array(items: Sequence[Mapping[str, float]]) -> np.ndarray:
    return np.array([(float(p["x"]), float(p["y"])) for p in items], dtype=np.float64).reshape(-1, 2)


def _check_finite(arr: np.ndarray, path: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ScenarioValidationError("non-finite number", path)


def _parse_object(doc: Mapping, i: int) -> RoadObject:
    path = f"$.objects[{i}]"
    for key in ("position", "heading", "velocity", "valid"):
        if len(doc[key]) != N_STEPS:
            raise TrajectoryLengthError(
                f"expected {N_STEPS} entries, got {len(doc[key])}", f"{path}.{key}")
    pos = _xy_array(doc["position"])
    vel = _xy_array(doc["velocity"])
    head = np.array(doc["heading"], dtype=np.float64)
    valid = np.array(doc["valid"], dtype=bool)
    _check_finite(pos, f"{path}.position")
    _check_finite(vel, f"{path}.velocity")
    _check_finite(head, f"{path}.heading")
    scalars = {k: float(doc[k]) for k in ("width", "length", "goalSpeed", "goalHeading")}
    goal = (float(doc["goalPosition"]["x"]), float(doc["goalPosition"]["y"]))
    for k, v in list(scalars.items()) + [("goalPosition", goal[0]), ("goalPosition", goal[1])]:
        if not math.isfinite(v):
            raise ScenarioValidationError("non-finite number", f"{path}.{k}")
    for k in ("width", "length"):
        if scalars[k] <= 0:
            raise ScenarioValidationError(f"{k} must be positive", f"{path}.{k}")

    traj = Trajectory(pos, head, vel, valid)
    last = traj.last_valid()
    if last >= 0:
        gp = np.array(goal)
        if np.hypot(*(pos[last] - gp)) > _GOAL_TOL * (1.0 + np.abs(gp).max()):
            raise ScenarioValidationError("goalPosition differs from final valid position", f"{path}.goalPosition")
        if abs(traj.speeds[last] - scalars["goalSpeed"]) > _GOAL_TOL * (1.0 + abs(scalars["goalSpeed"])):
            raise ScenarioValidationError("goalSpeed differs from final valid speed", f"{path}.goalSpeed")
        if min_angle(head[last], scalars["goalHeading"]) > _GOAL_TOL:
            raise ScenarioValidationError("goalHeading differs from final valid heading", f"{path}.goalHeading")

    return RoadObject(
        id=int(doc["id"]),
        kind=ObjectKind(doc["type"]),
        width=scalars["width"],
        length=scalars["length"],
        expert=traj,
        goal_position=goal,
        goal_speed=scalars["goalSpeed"],
        goal_heading=scalars["goalHeading"],
    )


def _parse_road(doc: Mapping, i: int) -> RoadLine:
    path = f"$.roads[{i}]"
    kind_name = doc["type"]
    if kind_name in _UNSUPPORTED_ROAD:
        raise UnsupportedElementError(f"unsupported element {kind_name!r}", f"{path}.type")
    try:
        kind = RoadKind(kind_name)
    except ValueError:
        kind = RoadKind.UNKNOWN
    pts = _xy_array(doc["geometry"])
    _check_finite(pts, f"{path}.geometry")
    if len(pts) < 1:
        raise ScenarioValidationError("road needs at least one point", f"{path}.geometry")
    if kind is RoadKind.STOP_SIGN and len(pts) != 1:
        raise ScenarioValidationError("stop sign must have exactly one point", f"{path}.geometry")
    return RoadLine(kind, pts)


def scenario_from_dict(doc: Mapping) -> Scenario:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ParseError(e.message, _path(e.absolute_path))
    if not math.isfinite(doc["dt"]) or abs(doc["dt"] - DT) > 1e-12:
        raise ScenarioValidationError(f"dt must be {DT}", "$.dt")
    objects = tuple(_parse_object(o, i) for i, o in enumerate(doc["objects"]))
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        raise ScenarioValidationError("duplicate object id", "$.objects")
    roads = tuple(_parse_road(r, i) for i, r in enumerate(doc["roads"]))
    return Scenario(name=doc["name"], objects=objects, roads=roads, dt=float(doc["dt"]))


def load_scenario(data: Union[bytes, str]) -> Scenario:
    """Parse and validate a scenario document."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8 ({exc.reason} at byte {exc.start})") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return scenario_from_dict(doc)


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    return load_scenario(Path(path).read_bytes())


def _xy_list(arr: np.ndarray) -> list[dict]:
    return [{"x": float(x), "y": float(y)} for x, y in arr]


def scenario_to_dict(scn: Scenario) -> dict:
    objects = []
    for o in scn.objects:
        e = o.expert
        objects.append({
            "id": o.id,
            "type": o.kind.value,
            "width": o.width,
            "length": o.length,
            "goalPosition": {"x": o.goal_position[0], "y": o.goal_position[1]},
            "goalSpeed": o.goal_speed,
            "goalHeading": o.goal_heading,
            "position": _xy_list(e.positions),
            "heading": [float(h) for h in e.headings],
            "velocity": _xy_list(e.velocities),
            "valid": [bool(v) for v in e.valid],
        })
    roads = [{"type": r.kind.value, "geometry": _xy_list(r.points)} for r in scn.roads]
    return {"name": scn.name, "dt": scn.dt, "objects": objects, "roads": roads}


def save_scenario(scn: Scenario) -> bytes:
    """Canonical serialization: compact separators, schema key order."""
    return json.dumps(scenario_to_dict(scn), separators=(",", ":"), allow_nan=False).encode("utf-8")


def save_scenario_file(scn: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_bytes(save_scenario(scn))


# ----------------------------------------------------------------- filtering

def object_boxes(obj: RoadObject, steps: np.ndarray, width_shrink: float = 0.0,
                 length_shrink: float = 0.0) -> np.ndarray:
    """Packed footprint boxes of an object's expert states at ``steps``."""
    e = obj.expert
    w = max(obj.width - width_shrink, 1e-6)
    l = max(obj.length - length_shrink, 1e-6)
    n = len(steps)
    return K.pack_boxes(e.positions[steps, 0], e.positions[steps, 1], e.headings[steps],
                        np.full(n, l), np.full(n, w))


def _hits_road_edge(scenario: Scenario, boxes: np.ndarray) -> np.ndarray:
    bvh = scenario.road_edge_bvh
    if len(bvh) == 0:
        return np.zeros(len(boxes), dtype=bool)
    return K.boxes_hit_segments(boxes, np.ascontiguousarray(scenario.road_edge_segments),
                                bvh.lo_x, bvh.lo_y, bvh.hi_x, bvh.hi_y,
                                bvh.left, bvh.right, bvh.item, bvh.root)


def goal_infeasible(obj: RoadObject, scenario: Scenario,
                    width_shrink: float = INFEASIBLE_WIDTH_SHRINK,
                    length_shrink: float = INFEASIBLE_LENGTH_SHRINK) -> bool:
    """Does the (slightly shrunk) expert footprint ever touch a road edge?"""
    steps = np.flatnonzero(obj.expert.valid)
    if steps.size == 0:
        return False
    boxes = object_boxes(obj, steps, width_shrink, length_shrink)
    return bool(np.any(_hits_road_edge(scenario, boxes)))


def initial_collision(obj: RoadObject, scenario: Scenario) -> bool:
    """Is the object's step-0 footprint overlapping another object or a road edge?"""
    if not obj.expert.valid[0]:
        return False
    step0 = np.array([0])
    mine = object_boxes(obj, step0)
    if _hits_road_edge(scenario, mine)[0]:
        return True
    for other in scenario.objects:
        if other.id == obj.id or not other.expert.valid[0]:
            continue
        if K.boxes_overlap(mine[0], object_boxes(other, step0)[0]):
            return True
    return False


def is_moving_candidate(obj: RoadObject) -> bool:
    e = obj.expert
    speeds = e.speeds[e.valid]
    if speeds.size == 0 or speeds.max() <= MOVING_SPEED:
        return False
    d = np.hypot(*(e.positions[0] - np.asarray(obj.goal_position)))
    return bool(d > AT_GOAL_DIST)


def select_controlled(scenario: Scenario, max_controlled: int = 20, seed: int = 0,
                      include_vru: bool = False) -> dict[int, Disposition]:
    """Partition objects into controlled, expert-replay, and removed.

    Vehicles absent at step 0 or overlapping something at step 0 are removed.
    Pedestrians and cyclists are removed unless ``include_vru``, in which case
    they replay. Moving, feasible vehicles form the candidate pool, from which
    up to ``max_controlled`` are drawn uniformly; the rest replay.
    """
    out: dict[int, Disposition] = {}
    candidates = []
    for obj in scenario.objects:
        if not obj.expert.valid[0]:
            out[obj.id] = Disposition.REMOVED
        elif not obj.is_vehicle:
            out[obj.id] = Disposition.EXPERT_REPLAY if include_vru else Disposition.REMOVED
        elif initial_collision(obj, scenario):
            out[obj.id] = Disposition.REMOVED
        else:
            out[obj.id] = Disposition.EXPERT_REPLAY
            if is_moving_candidate(obj) and not goal_infeasible(obj, scenario):
                candidates.append(obj.id)
    rng = np.random.default_rng(seed)
    k = min(max_controlled, len(candidates))
    chosen = rng.choice(np.array(sorted(candidates), dtype=np.int64), size=k, replace=False) if k else []
    for oid in chosen:
        out[int(oid)] = Disposition.CONTROLLED
    return out


@dataclass
class AuditReport:
    name: str
    n_vehicles: int
    infeasible: list[int] = field(default_factory=list)
    initial_collision: list[int] = field(default_factory=list)
    invalid_at_start: list[int] = field(default_factory=list)

    def rate(self, key: str) -> float:
        return len(getattr(self, key)) / self.n_vehicles if self.n_vehicles else 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_vehicles": self.n_vehicles,
            "infeasible_goal": {"count": len(self.infeasible), "rate": self.rate("infeasible"), "ids": self.infeasible},
            "initial_collision": {"count": len(self.initial_collision), "rate": self.rate("initial_collision"),
                                  "ids": self.initial_collision},
            "invalid_at_start": {"count": len(self.invalid_at_start), "rate": self.rate("invalid_at_start"),
                                 "ids": self.invalid_at_start},
        }


def audit(scenario: Scenario) -> AuditReport:
    rep = AuditReport(scenario.name, len(scenario.vehicles))
    for v in scenario.vehicles:
        if not v.expert.valid[0]:
            rep.invalid_at_start.append(v.id)
        if goal_infeasible(v, scenario):
            rep.infeasible.append(v.id)
        if initial_collision(v, scenario):
            rep.initial_collision.append(v.id)
    return rep
