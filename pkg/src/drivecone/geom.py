"""Planar geometry primitives and the intersection predicates built on them.

Everything here is scalar and pure. The simulator hot path uses the array
versions in :mod:`drivecone._kernels`, which implement the same predicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

TWO_PI = 2.0 * math.pi

# Collinearity slack in meters; map coordinates stay O(1e3) so this is far
# above double-precision noise and far below any physical length.
COLLINEAR_EPS = 1e-9
# Slack on segment parameters so shared endpoints register as touching.
PARAM_EPS = 1e-12


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x!r}, {self.y!r})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def __iter__(self):
        yield self.x
        yield self.y

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def angle(self) -> float:
        return math.atan2(self.y, self.x)

    def rotate(self, theta: float) -> "Vec2":
        c, s = math.cos(theta), math.sin(theta)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)


PointLike = Union[Vec2, Sequence[float]]


def as_vec(p: PointLike) -> Vec2:
    return p if isinstance(p, Vec2) else Vec2(float(p[0]), float(p[1]))


@dataclass(frozen=True, slots=True)
class Segment:
    a: Vec2
    b: Vec2

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", as_vec(self.a))
        object.__setattr__(self, "b", as_vec(self.b))

    def length(self) -> float:
        return (self.b - self.a).norm()


@dataclass(frozen=True, slots=True)
class AABB:
    min: Vec2
    max: Vec2

    def __post_init__(self) -> None:
        lo, hi = as_vec(self.min), as_vec(self.max)
        if lo.x > hi.x or lo.y > hi.y:
            raise ValueError(f"inverted AABB min={lo} max={hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @classmethod
    def from_points(cls, points: Iterable[PointLike]) -> "AABB":
        pts = [as_vec(p) for p in points]
        if not pts:
            raise ValueError("AABB of an empty point set")
        return cls(
            Vec2(min(p.x for p in pts), min(p.y for p in pts)),
            Vec2(max(p.x for p in pts), max(p.y for p in pts)),
        )

    def intersects(self, other: "AABB") -> bool:
        return (
            self.min.x <= other.max.x
            and other.min.x <= self.max.x
            and self.min.y <= other.max.y
            and other.min.y <= self.max.y
        )

    def contains_point(self, p: PointLike) -> bool:
        p = as_vec(p)
        return self.min.x <= p.x <= self.max.x and self.min.y <= p.y <= self.max.y

    def contains(self, other: "AABB") -> bool:
        return (
            self.min.x <= other.min.x
            and self.min.y <= other.min.y
            and other.max.x <= self.max.x
            and other.max.y <= self.max.y
        )

    def union(self, other: "AABB") -> "AABB":
        return AABB(
            Vec2(min(self.min.x, other.min.x), min(self.min.y, other.min.y)),
            Vec2(max(self.max.x, other.max.x), max(self.max.y, other.max.y)),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.min.x, self.min.y, self.max.x, self.max.y)


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(theta, TWO_PI)
    return math.pi if r == -math.pi else r


def min_angle(h1: float, h2: float) -> float:
    """Smallest absolute angle between two headings, in [0, pi]."""
    d = abs(h1 - h2) % TWO_PI
    return min(d, TWO_PI - d)


def signed_angle(from_heading: float, to_heading: float) -> float:
    """Signed rotation taking ``from_heading`` to ``to_heading``, in (-pi, pi]."""
    return wrap_angle(to_heading - from_heading)


@dataclass(frozen=True, slots=True)
class OrientedBox:
    center: Vec2
    heading: float
    length: float
    width: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_vec(self.center))
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"box extents must be positive, got {self.length}x{self.width}")
        if not math.isfinite(self.heading):
            raise ValueError("non-finite heading")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def axes(self) -> tuple[Vec2, Vec2]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Vec2(c, s), Vec2(-s, c)

    def corners(self) -> list[Vec2]:
        """Corners counter-clockwise starting front-left."""
        u, v = self.axes
        hl, hw = 0.5 * self.length, 0.5 * self.width
        c = self.center
        return [c + u * hl + v * hw, c - u * hl + v * hw, c - u * hl - v * hw, c + u * hl - v * hw]

    def edges(self) -> list[Segment]:
        cs = self.corners()
        return [Segment(cs[i], cs[(i + 1) % 4]) for i in range(4)]

    def aabb(self) -> AABB:
        return AABB.from_points(self.corners())

    def to_local(self, p: PointLike) -> Vec2:
        d = as_vec(p) - self.center
        u, v = self.axes
        return Vec2(d.dot(u), d.dot(v))

    def contains_point(self, p: PointLike) -> bool:
        q = self.to_local(p)
        return abs(q.x) <= 0.5 * self.length and abs(q.y) <= 0.5 * self.width


@dataclass(frozen=True, slots=True)
class Cone:
    apex: Vec2
    direction: float
    half_angle: float
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "apex", as_vec(self.apex))
        if not 0.0 < self.half_angle <= math.pi:
            raise ValueError(f"half_angle must be in (0, pi], got {self.half_angle}")
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")


def _point_on_segment(p: Vec2, s: Segment) -> bool:
    d = s.b - s.a
    dd = d.dot(d)
    if dd == 0.0:
        return (p - s.a).norm() <= COLLINEAR_EPS
    t = (p - s.a).dot(d) / dd
    if t < -PARAM_EPS or t > 1.0 + PARAM_EPS:
        return False
    return abs((p - s.a).cross(d)) / math.sqrt(dd) <= COLLINEAR_EPS


def segment_intersect(s1: Segment, s2: Segment) -> Optional[Vec2]:
    """Intersection point of two closed segments, or None.

    Collinear overlaps return the midpoint of the shared piece. A zero-length
    segment behaves as a point.
    """
    p, r = s1.a, s1.b - s1.a
    q, s = s2.a, s2.b - s2.a
    rn, sn = r.norm(), s.norm()
    if rn == 0.0 and sn == 0.0:
        return p if (p - q).norm() <= COLLINEAR_EPS else None
    if rn == 0.0:
        return p if _point_on_segment(p, s2) else None
    if sn == 0.0:
        return q if _point_on_segment(q, s1) else None

    qp = q - p
    rxs = r.cross(s)
    if abs(rxs) <= COLLINEAR_EPS * rn * sn:
        # parallel; collinear only if the lines coincide
        if max(abs(qp.cross(r)) / rn, abs(qp.cross(s)) / sn) > COLLINEAR_EPS:
            return None
        rr = r.dot(r)
        t0 = qp.dot(r) / rr
        t1 = t0 + s.dot(r) / rr
        lo, hi = max(0.0, min(t0, t1)), min(1.0, max(t0, t1))
        if lo > hi + PARAM_EPS:
            return None
        return p + r * (0.5 * (lo + hi))

    t = qp.cross(s) / rxs
    u = qp.cross(r) / rxs
    if -PARAM_EPS <= t <= 1.0 + PARAM_EPS and -PARAM_EPS <= u <= 1.0 + PARAM_EPS:
        return p + r * t
    return None


def _clip_to_box(box: OrientedBox, a: Vec2, b: Vec2) -> Optional[tuple[float, float]]:
    """Parameter interval of segment a->b inside the closed box, or None."""
    la, lb = box.to_local(a), box.to_local(b)
    lo, hi = 0.0, 1.0
    for o, e, half in ((la.x, lb.x, 0.5 * box.length), (la.y, lb.y, 0.5 * box.width)):
        d = e - o
        if d == 0.0:
            if abs(o) > half:
                return None
            continue
        t0, t1 = (-half - o) / d, (half - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        lo, hi = max(lo, t0), min(hi, t1)
        if lo > hi:
            return None
    return lo, hi


def box_segment_intersect(box: OrientedBox, seg: Segment) -> bool:
    """True iff the closed segment touches the closed rectangle."""
    return _clip_to_box(box, seg.a, seg.b) is not None


def ray_first_hit(origin: PointLike, target: PointLike, blockers: Iterable[OrientedBox]) -> bool:
    """True iff some blocker cuts the sight line strictly before the target.

    A blocker that contains the target point is ignored: the sight line
    reaches it, so it does not hide the target.
    """
    o, t = as_vec(origin), as_vec(target)
    for box in blockers:
        if box.contains_point(t):
            continue
        span = _clip_to_box(box, o, t)
        if span is not None and span[1] > 0.0 and span[0] < 1.0:
            return True
    return False


def box_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test on the four face normals; touching counts."""
    d = b.center - a.center
    ua, va = a.axes
    ub, vb = b.axes
    ha = (0.5 * a.length, 0.5 * a.width)
    hb = (0.5 * b.length, 0.5 * b.width)
    for axis in (ua, va, ub, vb):
        ra = ha[0] * abs(ua.dot(axis)) + ha[1] * abs(va.dot(axis))
        rb = hb[0] * abs(ub.dot(axis)) + hb[1] * abs(vb.dot(axis))
        if abs(d.dot(axis)) > ra + rb:
            return False
    return True


def in_cone(p: PointLike, cone: Cone) -> bool:
    p = as_vec(p)
    dx, dy = p.x - cone.apex.x, p.y - cone.apex.y
    if math.hypot(dx, dy) > cone.radius:
        return False
    return min_angle(math.atan2(dy, dx), cone.direction) <= cone.half_angle


def cone_aabb(cone: Cone, pad: float = 1e-6) -> AABB:
    """Conservative axis-aligned bound of a circular sector."""
    ax, ay, r = cone.apex.x, cone.apex.y, cone.radius
    if cone.half_angle >= math.pi:
        xs, ys = [ax - r, ax + r], [ay - r, ay + r]
    else:
        xs, ys = [ax], [ay]
        for phi in (cone.direction - cone.half_angle, cone.direction + cone.half_angle):
            xs.append(ax + r * math.cos(phi))
            ys.append(ay + r * math.sin(phi))
        for k in range(4):
            phi = 0.5 * math.pi * k
            if min_angle(phi, cone.direction) <= cone.half_angle:
                xs.append(ax + r * math.cos(phi))
                ys.append(ay + r * math.sin(phi))
    m = pad * (1.0 + r)
    return AABB(Vec2(min(xs) - m, min(ys) - m), Vec2(max(xs) + m, max(ys) + m))
