import math

import numpy as np
import pytest

from drivecone.synth import random_world
from drivecone.visibility import ViewConfig, visible_objects, visible_road_points, visible_set, visible_stop_signs
from drivecone.world import RoadMap, World
from oracles import brute_visible


def _world(pos, heading, length, width, points=(), stops=()):
    rm = RoadMap.from_points(np.array(points, dtype=float).reshape(-1, 2),
                             stop_signs=np.array(stops, dtype=float).reshape(-1, 2))
    return World.from_arrays(rm, np.array(pos, dtype=float), np.array(heading, dtype=float),
                             np.array(length, dtype=float), np.array(width, dtype=float))


def test_wall_hides_everything_behind_it():
    # ego at origin facing +x, a long truck across the view at x=10
    w = _world([(0, 0), (10, 0), (30, 0), (30, 30)], [0, math.pi / 2, 0, 0], [4, 60, 4, 4], [2, 2, 2, 2],
               points=[(20, 0), (5, 0), (30, 40)], stops=[(20, 1)])
    assert visible_objects(0, 0.0, w) == [1]
    assert visible_road_points(0, 0.0, w) == [1]
    # stop signs ignore occlusion
    assert visible_stop_signs(0, 0.0, w) == [0]


def test_cone_edges_and_range():
    w = _world([(0, 0), (79, 0), (90, 0), (-10, 0)], [0, 0, 0, 0], [4, 1, 1, 1], [2, 1, 1, 1])
    # the near corner of object 1 at x=78.5 is in range; object 2 is too far; object 3 is behind
    assert visible_objects(0, 0.0, w) == [1]
    # looking back over the shoulder is clamped by the caller, the cone just rotates
    assert visible_objects(0, math.pi, w) == [3]


def test_corner_sample_reveals_partly_hidden_box():
    # blocker covers the center of the target but not its far corner
    w = _world([(0, 0), (10, 0), (20, 1.5)], [0, 0, 0], [4, 1, 4], [2, 2.0, 4])
    assert 2 in visible_objects(0, 0.0, w)
    w1 = _world([(0, 0), (10, 0), (20, 1.5)], [0, 0, 0], [4, 1, 4], [2, 2.0, 4])
    assert 2 not in visible_objects(0, 0.0, w1, ViewConfig(samples_per_object=1))


def test_absent_objects_neither_seen_nor_blocking():
    w = _world([(0, 0), (10, 0), (20, 0)], [0, 0, 0], [4, 1, 1], [2, 6, 1])
    assert visible_objects(0, 0.0, w) == [1]
    w.present[1] = False
    w.touch()
    assert visible_objects(0, 0.0, w) == [2]


def test_ego_must_be_present():
    w = _world([(0, 0)], [0], [4], [2])
    w.present[0] = False
    w.touch()
    with pytest.raises(ValueError):
        visible_set(0, 0.0, w)


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    w = random_world(rng, n_points=3000)
    for _ in range(3):
        ego = int(rng.integers(len(w.ids)))
        tilt = float(rng.uniform(-math.pi / 2, math.pi / 2))
        vs = visible_set(int(w.ids[ego]), tilt, w)
        o, r, s = brute_visible(w.pos, w.heading, w.length, w.width, w.present, ego, tilt,
                                w.map.points, w.map.stop_signs)
        assert sorted(w.index_of[int(i)] for i in vs.objects) == o
        assert vs.road_points.tolist() == r
        assert vs.stop_signs.tolist() == s
