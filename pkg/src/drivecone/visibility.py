"""View-cone visibility with occlusion by road objects.

An element is seen when a sight line from the ego center reaches it inside
the cone without crossing another road object. Candidates come from the
world's object BVH and the map's range tree, queried with the cone's
bounding box; the exact cone and occlusion tests then run on those only.
Road geometry never occludes. Stop signs skip the occlusion test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .geom import Cone, Vec2

DEFAULT_VIEW_ANGLE = 2.0 * math.pi / 3.0
DEFAULT_VIEW_DISTANCE = 80.0
_NO_BLOCKERS = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class ViewConfig:
    view_angle: float = DEFAULT_VIEW_ANGLE
    view_distance: float = DEFAULT_VIEW_DISTANCE
    samples_per_object: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.view_angle <= 2.0 * math.pi:
            raise ValueError("view_angle must be in (0, 2*pi]")
        if self.view_distance <= 0:
            raise ValueError("view_distance must be positive")
        if self.samples_per_object not in (1, 5):
            raise ValueError("samples_per_object must be 1 (center) or 5 (center + corners)")


@dataclass(frozen=True)
class VisibleSet:
    objects: np.ndarray  # object ids
    road_points: np.ndarray  # road point indices
    stop_signs: np.ndarray  # stop sign indices


def view_cone(world, ego: int, tilt: float, cfg: ViewConfig) -> Cone:
    """Cone of world index ``ego`` looking along heading + tilt."""
    return Cone(Vec2(world.pos[ego, 0], world.pos[ego, 1]), float(world.heading[ego] + tilt),
                0.5 * cfg.view_angle, cfg.view_distance)


def _ego_index(world, ego_id: int) -> int:
    i = world.index_of[int(ego_id)]
    if not world.present[i]:
        raise ValueError(f"object {ego_id} is not present")
    return i


@dataclass(frozen=True)
class ConeView:
    """A cone plus the lookups shared by the three visibility queries."""
    cone: Cone
    bounds: tuple[float, float, float, float]
    ego: int
    blockers: np.ndarray  # present objects near the cone, ego excluded


def prepare_view(world, ego: int, tilt: float, cfg: ViewConfig) -> ConeView:
    cone = view_cone(world, ego, tilt, cfg)
    q = K.sector_bounds(cone.apex.x, cone.apex.y, cone.direction, cone.half_angle, cone.radius, 1e-6)
    near = world.query_objects(q)
    return ConeView(cone, q, ego, near[near != ego])


def visible_object_indices(world, ego: int, tilt: float, cfg: ViewConfig,
                           view: Optional[ConeView] = None) -> np.ndarray:
    v = view or prepare_view(world, ego, tilt, cfg)
    if v.blockers.size == 0:
        return v.blockers
    c = v.cone
    mask = K.visible_boxes(world.boxes, v.blockers, c.apex.x, c.apex.y, c.direction,
                           c.half_angle, c.radius, v.blockers, cfg.samples_per_object)
    return v.blockers[mask]


def visible_point_indices(world, ego: int, tilt: float, cfg: ViewConfig,
                          view: Optional[ConeView] = None) -> np.ndarray:
    v = view or prepare_view(world, ego, tilt, cfg)
    cand = world.map.tree.query(v.bounds)
    if cand.size == 0:
        return cand
    c = v.cone
    mask = K.visible_points(world.map.points, cand, c.apex.x, c.apex.y, c.direction,
                            c.half_angle, c.radius, world.boxes, v.blockers)
    return cand[mask]


def visible_stop_sign_indices(world, ego: int, tilt: float, cfg: ViewConfig,
                              view: Optional[ConeView] = None) -> np.ndarray:
    v = view or prepare_view(world, ego, tilt, cfg)
    cand = world.map.stop_tree.query(v.bounds)
    if cand.size == 0:
        return cand
    c = v.cone
    mask = K.visible_points(world.map.stop_signs, cand, c.apex.x, c.apex.y, c.direction,
                            c.half_angle, c.radius, world.boxes, _NO_BLOCKERS)
    return cand[mask]


def visible_objects(ego_id: int, tilt: float, world, cfg: ViewConfig = ViewConfig()) -> list[int]:
    """Ids of road objects visible to ``ego_id``."""
    idx = visible_object_indices(world, _ego_index(world, ego_id), tilt, cfg)
    return sorted(world.ids[idx].tolist())


def visible_road_points(ego_id: int, tilt: float, world, cfg: ViewConfig = ViewConfig()) -> list[int]:
    idx = visible_point_indices(world, _ego_index(world, ego_id), tilt, cfg)
    return sorted(idx.tolist())


def visible_stop_signs(ego_id: int, tilt: float, world, cfg: ViewConfig = ViewConfig()) -> list[int]:
    idx = visible_stop_sign_indices(world, _ego_index(world, ego_id), tilt, cfg)
    return sorted(idx.tolist())


def visible_set(ego_id: int, tilt: float, world, cfg: ViewConfig = ViewConfig()) -> VisibleSet:
    ego = _ego_index(world, ego_id)
    v = prepare_view(world, ego, tilt, cfg)
    return VisibleSet(
        objects=np.sort(world.ids[visible_object_indices(world, ego, tilt, cfg, v)]),
        road_points=np.sort(visible_point_indices(world, ego, tilt, cfg, v)),
        stop_signs=np.sort(visible_stop_sign_indices(world, ego, tilt, cfg, v)),
    )
