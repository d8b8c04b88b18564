import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivecone import _kernels as K
from drivecone.geom import (AABB, Cone, OrientedBox, Segment, Vec2, box_overlap, box_segment_intersect,
                            cone_aabb, in_cone, min_angle, ray_first_hit, segment_intersect, signed_angle,
                            wrap_angle)
from oracles import rect_corners, rects_overlap

coord = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)
extent = st.floats(0.2, 8.0)


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.5) == 0.5


@given(angle, angle)
def test_min_angle_symmetric_and_bounded(a, b):
    m = min_angle(a, b)
    assert 0.0 <= m <= math.pi + 1e-12
    assert m == pytest.approx(min_angle(b, a), abs=1e-12)
    assert abs(signed_angle(a, b)) == pytest.approx(m, abs=1e-9)


def test_segment_intersect_cases():
    p = segment_intersect(Segment((0, 0), (2, 2)), Segment((0, 2), (2, 0)))
    assert (p.x, p.y) == pytest.approx((1.0, 1.0))
    assert segment_intersect(Segment((0, 0), (1, 0)), Segment((0, 1), (1, 1))) is None
    # collinear overlap reports the middle of the shared piece
    p = segment_intersect(Segment((0, 0), (4, 0)), Segment((2, 0), (6, 0)))
    assert (p.x, p.y) == pytest.approx((3.0, 0.0))
    # touching at an endpoint counts
    assert segment_intersect(Segment((0, 0), (1, 0)), Segment((1, 0), (1, 5))) is not None


def test_box_corners_and_containment():
    b = OrientedBox(Vec2(0, 0), 0.0, 4.0, 2.0)
    xs = sorted({round(c.x, 9) for c in b.corners()})
    assert xs == [-2.0, 2.0]
    assert b.contains_point((2.0, 1.0))
    assert not b.contains_point((2.01, 0.0))


def test_box_overlap_touching_counts():
    a = OrientedBox(Vec2(0, 0), 0.0, 2.0, 2.0)
    assert box_overlap(a, OrientedBox(Vec2(2.0, 0), 0.0, 2.0, 2.0))
    assert not box_overlap(a, OrientedBox(Vec2(2.001, 0), 0.0, 2.0, 2.0))


@settings(max_examples=300)
@given(coord, coord, angle, extent, extent, coord, coord, angle, extent, extent)
def test_box_overlap_matches_polygon_oracle(x1, y1, h1, l1, w1, x2, y2, h2, l2, w2):
    a = OrientedBox(Vec2(x1, y1), h1, l1, w1)
    b = OrientedBox(Vec2(x2, y2), h2, l2, w2)
    expect = rects_overlap(rect_corners(x1, y1, h1, l1, w1), rect_corners(x2, y2, h2, l2, w2))
    # skip near-touching configurations where the two formulations may round differently
    gap = K.boxes_overlap(K.pack_boxes(x1, y1, h1, l1 * 1.0001, w1 * 1.0001)[0],
                          K.pack_boxes(x2, y2, h2, l2, w2)[0]) != K.boxes_overlap(
        K.pack_boxes(x1, y1, h1, l1 * 0.9999, w1 * 0.9999)[0], K.pack_boxes(x2, y2, h2, l2, w2)[0])
    if not gap:
        assert box_overlap(a, b) == expect
        assert box_overlap(b, a) == expect


def test_kernel_overlap_agrees_with_scalar():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        x = rng.uniform(-5, 5, 2)
        y = rng.uniform(-5, 5, 2)
        h = rng.uniform(-4, 4, 2)
        l = rng.uniform(0.5, 5, 2)
        w = rng.uniform(0.5, 3, 2)
        boxes = K.pack_boxes(x, y, h, l, w)
        scalar = box_overlap(OrientedBox(Vec2(x[0], y[0]), h[0], l[0], w[0]),
                             OrientedBox(Vec2(x[1], y[1]), h[1], l[1], w[1]))
        assert K.boxes_overlap(boxes[0], boxes[1]) == scalar


def test_ray_blocking_rules():
    wall = OrientedBox(Vec2(5, 0), 0.0, 1.0, 4.0)
    assert ray_first_hit((0, 0), (10, 0), [wall])
    assert not ray_first_hit((0, 0), (10, 5), [wall])
    # the target inside the blocker is still reached
    assert not ray_first_hit((0, 0), (5, 0), [wall])
    assert box_segment_intersect(wall, Segment((0, 0), (10, 0)))


def test_cone_membership_and_bounds():
    c = Cone(Vec2(0, 0), 0.0, math.pi / 3, 80.0)
    assert in_cone((10, 0), c)
    assert in_cone((80, 0), c)
    assert not in_cone((80.01, 0), c)
    assert not in_cone((-1, 0), c)
    edge = (40 * math.cos(math.pi / 3 - 1e-9), 40 * math.sin(math.pi / 3 - 1e-9))
    assert in_cone(edge, c)
    box = cone_aabb(c)
    assert box.min.x <= 0.0 and box.max.x >= 80.0


@given(coord, coord, st.floats(-math.pi, math.pi), st.floats(0.1, math.pi), st.floats(1, 100),
       st.floats(0, 1), st.floats(-1, 1))
def test_cone_aabb_contains_sector(ax, ay, d, half, r, fr, fa):
    c = Cone(Vec2(ax, ay), d, half, r)
    box = cone_aabb(c)
    phi = d + fa * half
    p = (ax + fr * r * math.cos(phi), ay + fr * r * math.sin(phi))
    assert box.contains_point(p)


def test_aabb_rejects_inverted():
    with pytest.raises(ValueError):
        AABB(Vec2(1, 0), Vec2(0, 1))
    with pytest.raises(ValueError):
        Vec2(float("nan"), 0)
