"""Array-backed world snapshot shared by visibility, observations and the sim.

``RoadMap`` holds per-scenario static geometry and its indexes. ``World``
holds per-object arrays for the current step and lazily rebuilds the object
BVH when states change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .scenario import N_ROAD_KINDS, ObjectKind, RoadKind, Scenario
from .spatial import Bvh, RangeTree


@dataclass
class RoadMap:
    points: np.ndarray  # (m, 2)
    kinds: np.ndarray  # (m,) road kind index
    neighbor: np.ndarray  # (m, 2) vector to the next point on the polyline
    stop_signs: np.ndarray  # (s, 2)
    edge_segments: np.ndarray  # (e, 4)

    def __post_init__(self) -> None:
        self.points = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 2)
        self.kinds = np.asarray(self.kinds, dtype=np.int64)
        self.neighbor = np.ascontiguousarray(self.neighbor, dtype=np.float64).reshape(-1, 2)
        self.stop_signs = np.ascontiguousarray(self.stop_signs, dtype=np.float64).reshape(-1, 2)
        self.edge_segments = np.ascontiguousarray(self.edge_segments, dtype=np.float64).reshape(-1, 4)
        self.tree = RangeTree(self.points)
        self.stop_tree = RangeTree(self.stop_signs)
        self.edge_bvh = Bvh(K.segment_aabbs(self.edge_segments))

    @classmethod
    def from_points(cls, points: np.ndarray, kinds: Optional[np.ndarray] = None,
                    stop_signs: Optional[np.ndarray] = None) -> "RoadMap":
        """Unconnected points (no neighbors, no road edges)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if kinds is None:
            kinds = np.full(len(points), RoadKind.LANE_CENTER.index)
        stop = np.empty((0, 2)) if stop_signs is None else stop_signs
        return cls(points, kinds, np.zeros_like(points), stop, np.empty((0, 4)))

    @classmethod
    def from_scenario(cls, scn: Scenario) -> "RoadMap":
        pts, kinds, nbr, stops = [], [], [], []
        for road in scn.roads:
            p = road.points
            n = np.zeros_like(p)
            n[:-1] = p[1:] - p[:-1]
            pts.append(p)
            nbr.append(n)
            kinds.append(np.full(len(p), road.kind.index))
            if road.kind is RoadKind.STOP_SIGN:
                stops.append(p[0])
        cat = (lambda xs, w: np.vstack(xs) if xs else np.empty((0, w)))
        return cls(
            cat(pts, 2),
            np.concatenate(kinds) if kinds else np.empty(0, dtype=np.int64),
            cat(nbr, 2),
            np.array(stops).reshape(-1, 2),
            np.array(scn.road_edge_segments).reshape(-1, 4),
        )

    @property
    def n_road_kinds(self) -> int:
        return N_ROAD_KINDS


class World:
    """Mutable per-object state for the current step.

    ``present`` marks objects that exist this step (not removed, and with a
    valid state). Only present objects occlude, collide, or are observed.
    """

    def __init__(self, road_map: RoadMap, ids: Sequence[int], kinds: Sequence[int],
                 length: Sequence[float], width: Sequence[float]):
        self.map = road_map
        self.ids = np.asarray(ids, dtype=np.int64)
        n = len(self.ids)
        self.index_of = {int(i): k for k, i in enumerate(self.ids)}
        self.kinds = np.asarray(kinds, dtype=np.int64)
        self.length = np.asarray(length, dtype=np.float64)
        self.width = np.asarray(width, dtype=np.float64)
        self.pos = np.zeros((n, 2))
        self.heading = np.zeros(n)
        self.speed = np.zeros(n)
        self.present = np.zeros(n, dtype=bool)
        self._boxes: Optional[np.ndarray] = None
        self._bvh: Optional[Bvh] = None
        self._present_idx: Optional[np.ndarray] = None

    @classmethod
    def from_scenario(cls, scn: Scenario, road_map: Optional[RoadMap] = None) -> "World":
        road_map = road_map or RoadMap.from_scenario(scn)
        objs = scn.objects
        return cls(road_map, [o.id for o in objs], [o.kind.index for o in objs],
                   [o.length for o in objs], [o.width for o in objs])

    @classmethod
    def from_arrays(cls, road_map: RoadMap, pos, heading, length, width, speed=None,
                    kinds=None, ids=None, present=None) -> "World":
        n = len(pos)
        ids = np.arange(n) if ids is None else ids
        kinds = np.full(n, ObjectKind.VEHICLE.index) if kinds is None else kinds
        w = cls(road_map, ids, kinds, length, width)
        w.pos[:] = pos
        w.heading[:] = heading
        w.speed[:] = 0.0 if speed is None else speed
        w.present[:] = True if present is None else present
        return w

    def __len__(self) -> int:
        return len(self.ids)

    def touch(self) -> None:
        """Invalidate cached boxes and BVH after a state change."""
        self._boxes = None
        self._bvh = None
        self._present_idx = None

    @property
    def boxes(self) -> np.ndarray:
        if self._boxes is None:
            self._boxes = K.pack_boxes(self.pos[:, 0], self.pos[:, 1], self.heading,
                                       self.length, self.width)
        return self._boxes

    @property
    def present_idx(self) -> np.ndarray:
        if self._present_idx is None:
            self._present_idx = np.flatnonzero(self.present)
        return self._present_idx

    @property
    def bvh(self) -> Bvh:
        """BVH over present objects; items index ``present_idx``."""
        if self._bvh is None:
            self._bvh = Bvh(K.box_aabbs(self.boxes[self.present_idx]), checked=True)
        return self._bvh

    def query_objects(self, q) -> np.ndarray:
        """World indices of present objects whose boxes meet AABB ``q``."""
        return self.present_idx[self.bvh.query(q)]

    def collisions(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-object (vehicle_or_object_hit, road_edge_hit) for present objects."""
        n = len(self)
        veh = np.zeros(n, dtype=bool)
        edge = np.zeros(n, dtype=bool)
        idx = self.present_idx
        if idx.size == 0:
            return veh, edge
        boxes = np.ascontiguousarray(self.boxes[idx])
        b = self.bvh
        veh[idx] = K.boxes_hit_boxes(boxes, b.lo_x, b.lo_y, b.hi_x, b.hi_y, b.left, b.right, b.item, b.root)
        e = self.map.edge_bvh
        if len(e):
            edge[idx] = K.boxes_hit_segments(boxes, self.map.edge_segments, e.lo_x, e.lo_y, e.hi_x,
                                             e.hi_y, e.left, e.right, e.item, e.root)
        return veh, edge
