"""Fixed-size ego-frame observations and a top-down raster.

The flat vector is ``[ego | objects | road points | stop signs]``. Each
block holds the visible elements sorted by distance (ties by id), cut to
the layout maximum and zero padded. Everything is expressed relative to the
ego pose, so a rigid motion of the whole world leaves it unchanged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from . import _kernels as K
from .dynamics import KinState
from .geom import min_angle, signed_angle
from .scenario import N_ROAD_KINDS, ObjectKind, RoadKind
from .visibility import (ViewConfig, prepare_view, visible_object_indices, visible_point_indices,
                         visible_stop_sign_indices)

N_OBJECT_KINDS = len(ObjectKind)


@dataclass(frozen=True)
class ObsLayout:
    max_road_points: int = 500
    max_objects: int = 16
    max_stop_signs: int = 4
    ego_width: int = 7
    object_width: int = 10
    road_point_width: int = 11
    stop_sign_width: int = 2

    @property
    def dim(self) -> int:
        return (self.ego_width + self.max_objects * self.object_width
                + self.max_road_points * self.road_point_width
                + self.max_stop_signs * self.stop_sign_width)

    @property
    def n_slots(self) -> int:
        return 1 + self.max_objects + self.max_road_points + self.max_stop_signs

    def offsets(self) -> dict[str, int]:
        o = self.ego_width
        r = o + self.max_objects * self.object_width
        s = r + self.max_road_points * self.road_point_width
        return {"ego": 0, "objects": o, "road_points": r, "stop_signs": s, "end": s + self.max_stop_signs * self.stop_sign_width}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dim"] = self.dim
        d["offsets"] = self.offsets()
        d["object_features"] = ["speed", "velocity_angle", "width", "length", "bearing", "distance",
                                "relative_heading", *(f"is_{k.value}" for k in ObjectKind)]
        d["ego_features"] = ["speed", "goal_distance", "goal_bearing", "width", "length",
                             "goal_speed_delta", "goal_heading_delta"]
        d["road_point_features"] = ["bearing", "distance", "neighbor_x", "neighbor_y",
                                    *(f"is_{k.value}" for k in RoadKind)]
        d["stop_sign_features"] = ["bearing", "distance"]
        return d


@dataclass(frozen=True)
class Goal:
    x: float
    y: float
    speed: float
    heading: float


@dataclass
class Observation:
    vector: np.ndarray
    mask: np.ndarray  # per slot: ego, objects, road points, stop signs
    object_ids: np.ndarray
    road_point_ids: np.ndarray
    stop_sign_ids: np.ndarray
    layout: ObsLayout

    def block(self, name: str) -> np.ndarray:
        off = self.layout.offsets()
        keys = ["ego", "objects", "road_points", "stop_signs", "end"]
        i = keys.index(name)
        return self.vector[off[name]:off[keys[i + 1]]]


def _to_local(dx, dy, heading):
    c, s = math.cos(heading), math.sin(heading)
    return dx * c + dy * s, -dx * s + dy * c


def ego_features(ego: KinState, width: float, length: float, goal: Goal) -> np.ndarray:
    dx, dy = goal.x - ego.x, goal.y - ego.y
    lx, ly = _to_local(dx, dy, ego.heading)
    return np.array([
        ego.speed,
        math.hypot(dx, dy),
        math.atan2(ly, lx),
        width,
        length,
        goal.speed - ego.speed,
        signed_angle(ego.heading, goal.heading),
    ])


def object_features(ego: KinState, other: KinState, width: float, length: float,
                    kind: ObjectKind) -> np.ndarray:
    dx, dy = other.x - ego.x, other.y - ego.y
    lx, ly = _to_local(dx, dy, ego.heading)
    v_ego = ego.heading + (math.pi if ego.speed < 0 else 0.0)
    v_other = other.heading + (math.pi if other.speed < 0 else 0.0)
    onehot = np.zeros(N_OBJECT_KINDS)
    onehot[kind.index] = 1.0
    return np.concatenate([[
        other.speed,
        min_angle(v_other, v_ego),
        width,
        length,
        math.atan2(ly, lx),
        math.hypot(dx, dy),
        signed_angle(ego.heading, other.heading),
    ], onehot])


def road_point_features(ego: KinState, point, neighbor, kind: RoadKind) -> np.ndarray:
    dx, dy = point[0] - ego.x, point[1] - ego.y
    lx, ly = _to_local(dx, dy, ego.heading)
    nx, ny = _to_local(neighbor[0], neighbor[1], ego.heading)
    onehot = np.zeros(N_ROAD_KINDS)
    onehot[kind.index] = 1.0
    return np.concatenate([[math.atan2(ly, lx), math.hypot(dx, dy), nx, ny], onehot])


def _nearest(dist, ids, k):
    """Indices of the k nearest, ties broken by id."""
    if len(dist) > k:
        # only the entries up to the k-th distance can make the cut
        thr = np.partition(dist, k - 1)[k - 1]
        sub = np.flatnonzero(dist <= thr)
        return sub[np.lexsort((ids[sub], dist[sub]))][:k]
    return np.lexsort((ids, dist))


def build_observation(ego_id: int, tilt: float, world, goal: Goal, layout: ObsLayout = ObsLayout(),
                      cfg: ViewConfig = ViewConfig()) -> Observation:
    ego = world.index_of[int(ego_id)]
    if not world.present[ego]:
        raise ValueError(f"object {ego_id} is not present")
    ex, ey = world.pos[ego]
    h = world.heading[ego]
    v = world.speed[ego]
    c, s = math.cos(h), math.sin(h)
    vec = np.zeros(layout.dim)
    mask = np.zeros(layout.n_slots, dtype=bool)
    off = layout.offsets()

    vec[:layout.ego_width] = ego_features(KinState(ex, ey, h, v), world.width[ego], world.length[ego], goal)
    mask[0] = True

    view = prepare_view(world, ego, tilt, cfg)
    rm = world.map

    # objects
    idx = visible_object_indices(world, ego, tilt, cfg, view)
    dist = K.point_distances(world.pos, idx, ex, ey)
    keep = _nearest(dist, world.ids[idx], layout.max_objects)
    idx, dist = idx[keep], dist[keep]
    n = len(idx)
    if n:
        r0 = off["objects"]
        f = vec[r0:r0 + n * layout.object_width].reshape(n, layout.object_width)
        K.object_rows(world.pos, world.heading, world.speed, world.width, world.length, world.kinds,
                      idx, dist, ex, ey, h, v, f)
        mask[1:1 + n] = True
    object_ids = world.ids[idx]

    # road points
    pidx = visible_point_indices(world, ego, tilt, cfg, view)
    dist = K.point_distances(rm.points, pidx, ex, ey)
    keep = _nearest(dist, pidx, layout.max_road_points)
    pidx, dist = pidx[keep], dist[keep]
    n = len(pidx)
    if n:
        r0 = off["road_points"]
        f = vec[r0:r0 + n * layout.road_point_width].reshape(n, layout.road_point_width)
        K.road_point_rows(rm.points, rm.neighbor, rm.kinds, pidx, dist, ex, ey, c, s, f)
        base = 1 + layout.max_objects
        mask[base:base + n] = True

    # stop signs
    sidx = visible_stop_sign_indices(world, ego, tilt, cfg, view)
    dist = K.point_distances(rm.stop_signs, sidx, ex, ey)
    keep = _nearest(dist, sidx, layout.max_stop_signs)
    sidx, dist = sidx[keep], dist[keep]
    n = len(sidx)
    if n:
        r0 = off["stop_signs"]
        f = vec[r0:r0 + n * layout.stop_sign_width].reshape(n, layout.stop_sign_width)
        K.stop_sign_rows(rm.stop_signs, sidx, dist, ex, ey, h, f)
        base = 1 + layout.max_objects + layout.max_road_points
        mask[base:base + n] = True

    return Observation(vec, mask, object_ids, pidx, sidx, layout)


# ------------------------------------------------------------------ raster

_ROAD_SHADE = {
    RoadKind.LANE_CENTER: 80, RoadKind.ROAD_LINE: 120, RoadKind.ROAD_EDGE: 255,
    RoadKind.STOP_SIGN: 200, RoadKind.CROSSWALK: 160, RoadKind.SPEED_BUMP: 180, RoadKind.UNKNOWN: 60,
}
_ROAD_SHADE_BY_INDEX = np.array([_ROAD_SHADE[k] for k in RoadKind])
_OBJECT_SHADE = {ObjectKind.VEHICLE: 255, ObjectKind.PEDESTRIAN: 180, ObjectKind.CYCLIST: 120}
_OBJECT_SHADE_BY_INDEX = [_OBJECT_SHADE[k] for k in ObjectKind]
EGO_SHADE = 255
STOP_SIGN_SHADE = 128


def rasterize(ego_id: int, world, px: int = 256, meters_per_px: float = 0.5, tilt: float = 0.0,
              view: str = "cone", cfg: ViewConfig = ViewConfig()) -> np.ndarray:
    """Ego-centered, heading-up RGB raster.

    Channels: red holds other road objects, green holds road polylines
    (shade by road kind), blue holds the ego box and stop signs. In the
    ``cone`` view only visible elements are drawn; ``full`` draws everything.
    """
    if px <= 0 or meters_per_px <= 0:
        raise ValueError("resolution and scale must be positive")
    if view not in ("cone", "full"):
        raise ValueError(f"unknown view {view!r}")
    ego = world.index_of[int(ego_id)]
    if not world.present[ego]:
        raise ValueError(f"object {ego_id} is not present")
    ex, ey = world.pos[ego]
    h = world.heading[ego]
    c, s = math.cos(h), math.sin(h)
    half = px / 2.0

    def to_px(xy):
        dx = xy[..., 0] - ex
        dy = xy[..., 1] - ey
        lx = dx * c + dy * s
        ly = -dx * s + dy * c
        return np.stack([np.round(half - ly / meters_per_px), np.round(half - lx / meters_per_px)], axis=-1)

    rm = world.map
    layers = {k: Image.new("L", (px, px), 0) for k in "RGB"}
    draw = {k: ImageDraw.Draw(im) for k, im in layers.items()}

    if view == "cone":
        obj_idx = visible_object_indices(world, ego, tilt, cfg)
        pt_idx = visible_point_indices(world, ego, tilt, cfg)
        stop_idx = visible_stop_sign_indices(world, ego, tilt, cfg)
    else:
        obj_idx = np.setdiff1d(world.present_idx, [ego])
        pt_idx = np.arange(len(rm.points))
        stop_idx = np.arange(len(rm.stop_signs))

    # road polylines: segment i -> i+1 when both ends are drawn
    pts_px = to_px(rm.points[pt_idx]) if len(pt_idx) else np.empty((0, 2))
    drawn = np.zeros(len(rm.points), dtype=bool)
    drawn[pt_idx] = True
    slot = np.full(len(rm.points), -1)
    slot[pt_idx] = np.arange(len(pt_idx))
    connected = np.any(rm.neighbor[pt_idx] != 0.0, axis=1) if len(pt_idx) else np.empty(0, bool)
    for k, i in enumerate(pt_idx):
        shade = int(_ROAD_SHADE_BY_INDEX[rm.kinds[i]])
        a = tuple(int(v) for v in pts_px[k])
        if connected[k] and i + 1 < len(rm.points) and drawn[i + 1]:
            b = tuple(int(v) for v in pts_px[slot[i + 1]])
            draw["G"].line([a, b], fill=shade)
        else:
            draw["G"].point(a, fill=shade)

    corners = np.empty((4, 2))
    boxes = world.boxes
    for i in obj_idx:
        for k in range(4):
            corners[k] = K.box_corner(boxes[i], k)
        poly = [tuple(int(v) for v in p) for p in to_px(corners)]
        draw["R"].polygon(poly, fill=_OBJECT_SHADE_BY_INDEX[world.kinds[i]])
    for k in range(4):
        corners[k] = K.box_corner(boxes[ego], k)
    draw["B"].polygon([tuple(int(v) for v in p) for p in to_px(corners)], fill=EGO_SHADE)
    for i in stop_idx:
        x, y = (int(v) for v in to_px(rm.stop_signs[i]))
        draw["B"].rectangle([x - 1, y - 1, x + 1, y + 1], fill=STOP_SIGN_SHADE)

    return np.stack([np.asarray(layers[k]) for k in "RGB"], axis=-1)


def save_png(image: np.ndarray, path) -> None:
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, format="PNG", optimize=False)
