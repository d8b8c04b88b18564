"""Compiled array kernels for the per-step hot path.

Boxes are rows ``(cx, cy, cos(heading), sin(heading), half_length,
half_width)``; segments are rows ``(ax, ay, bx, by)``. The predicates mirror
the scalar ones in :mod:`drivecone.geom` operation for operation.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
# widening applied to candidate boxes so index lookups stay conservative
AABB_PAD = 1e-9
# slack used by the occluder culls; the exact test still decides
CULL_EPS = 1e-9


@njit(cache=True)
def _pack(cx, cy, heading, length, width):
    n = cx.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        out[i, 0] = cx[i]
        out[i, 1] = cy[i]
        out[i, 2] = math.cos(heading[i])
        out[i, 3] = math.sin(heading[i])
        out[i, 4] = 0.5 * length[i]
        out[i, 5] = 0.5 * width[i]
    return out


def pack_boxes(cx, cy, heading, length, width) -> np.ndarray:
    f = lambda a: np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
    n = len(f(cx))
    bc = lambda a: f(np.broadcast_to(np.asarray(a, dtype=np.float64), (n,)))
    return _pack(f(cx), f(cy), bc(heading), bc(length), bc(width))


@njit(cache=True)
def load_states(mask, valid, alive, src_pos, src_head, src_speed, pos, heading, speed, present):
    """Copy recorded states where ``mask`` and ``valid``; update presence under ``mask``."""
    for i in range(mask.shape[0]):
        if not mask[i]:
            continue
        if valid[i]:
            pos[i, 0] = src_pos[i, 0]
            pos[i, 1] = src_pos[i, 1]
            heading[i] = src_head[i]
            speed[i] = src_speed[i]
        present[i] = valid[i] and alive[i]


@njit(cache=True)
def goal_hits(pos, speed, heading, goals, cand, pos_tol, speed_tol, heading_tol):
    """Subset of world indices ``cand`` inside all three goal tolerances."""
    out = np.empty(cand.shape[0], dtype=np.int64)
    k = 0
    for i in cand:
        if (math.hypot(pos[i, 0] - goals[i, 0], pos[i, 1] - goals[i, 1]) <= pos_tol
                and abs(speed[i] - goals[i, 2]) <= speed_tol
                and min_angle(heading[i], goals[i, 3]) <= heading_tol):
            out[k] = i
            k += 1
    return out[:k]


@njit(cache=True)
def box_aabbs(boxes):
    n = boxes.shape[0]
    out = np.empty((n, 4))
    for i in range(n):
        c = abs(boxes[i, 2])
        s = abs(boxes[i, 3])
        ex = c * boxes[i, 4] + s * boxes[i, 5] + AABB_PAD
        ey = s * boxes[i, 4] + c * boxes[i, 5] + AABB_PAD
        out[i, 0] = boxes[i, 0] - ex
        out[i, 1] = boxes[i, 1] - ey
        out[i, 2] = boxes[i, 0] + ex
        out[i, 3] = boxes[i, 1] + ey
    return out


@njit(cache=True)
def segment_aabbs(segs):
    n = segs.shape[0]
    out = np.empty((n, 4))
    for i in range(n):
        out[i, 0] = min(segs[i, 0], segs[i, 2]) - AABB_PAD
        out[i, 1] = min(segs[i, 1], segs[i, 3]) - AABB_PAD
        out[i, 2] = max(segs[i, 0], segs[i, 2]) + AABB_PAD
        out[i, 3] = max(segs[i, 1], segs[i, 3]) + AABB_PAD
    return out


@njit(cache=True, inline="always")
def min_angle(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


@njit(cache=True, inline="always")
def in_cone(px, py, ax, ay, direction, half, radius):
    dx = px - ax
    dy = py - ay
    if math.hypot(dx, dy) > radius:
        return False
    return min_angle(math.atan2(dy, dx), direction) <= half


@njit(cache=True, inline="always")
def _local(box, x, y):
    dx = x - box[0]
    dy = y - box[1]
    return dx * box[2] + dy * box[3], dx * -box[3] + dy * box[2]


@njit(cache=True, inline="always")
def point_in_box(box, x, y):
    lx, ly = _local(box, x, y)
    return abs(lx) <= box[4] and abs(ly) <= box[5]


@njit(cache=True, inline="always")
def clip_segment(box, ax, ay, bx, by):
    """(hit, lo, hi): parameter span of a->b inside the closed box."""
    oax, oay = _local(box, ax, ay)
    obx, oby = _local(box, bx, by)
    lo = 0.0
    hi = 1.0
    for axis in range(2):
        if axis == 0:
            o = oax
            e = obx
            half = box[4]
        else:
            o = oay
            e = oby
            half = box[5]
        d = e - o
        if d == 0.0:
            if abs(o) > half:
                return False, lo, hi
            continue
        t0 = (-half - o) / d
        t1 = (half - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        lo = max(lo, t0)
        hi = min(hi, t1)
        if lo > hi:
            return False, lo, hi
    return True, lo, hi


@njit(cache=True, inline="always")
def sight_blocked(box, ox, oy, tx, ty):
    if point_in_box(box, tx, ty):
        return False
    hit, lo, hi = clip_segment(box, ox, oy, tx, ty)
    return hit and hi > 0.0 and lo < 1.0


@njit(cache=True, inline="always")
def boxes_overlap(a, b):
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    for k in range(4):
        if k == 0:
            axx, axy = a[2], a[3]
        elif k == 1:
            axx, axy = -a[3], a[2]
        elif k == 2:
            axx, axy = b[2], b[3]
        else:
            axx, axy = -b[3], b[2]
        ra = a[4] * abs(a[2] * axx + a[3] * axy) + a[5] * abs(-a[3] * axx + a[2] * axy)
        rb = b[4] * abs(b[2] * axx + b[3] * axy) + b[5] * abs(-b[3] * axx + b[2] * axy)
        if abs(dx * axx + dy * axy) > ra + rb:
            return False
    return True


@njit(cache=True, inline="always")
def box_corner(box, k):
    """Corner k of a box, counter-clockwise from front-left."""
    su = 1.0 if k == 0 or k == 3 else -1.0
    sv = 1.0 if k == 0 or k == 1 else -1.0
    ux = box[2] * box[4] * su
    uy = box[3] * box[4] * su
    vx = -box[3] * box[5] * sv
    vy = box[2] * box[5] * sv
    return box[0] + ux + vx, box[1] + uy + vy


@njit(cache=True)
def _bvh_any(lo_x, lo_y, hi_x, hi_y, left, right, item, root, q0, q1, q2, q3, stack):
    """Collect leaf items whose boxes meet the query into ``stack``'s tail."""
    # returns hits packed at the start of a fresh array
    n = lo_x.shape[0]
    out = np.empty((n + 1) // 2, dtype=np.int64)
    k = 0
    if n == 0:
        return out[:0]
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if lo_x[node] > q2 or q0 > hi_x[node] or lo_y[node] > q3 or q1 > hi_y[node]:
            continue
        if left[node] < 0:
            out[k] = item[node]
            k += 1
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    return out[:k]


@njit(cache=True)
def boxes_hit_segments(boxes, segs, lo_x, lo_y, hi_x, hi_y, left, right, item, root):
    """Per box: does it touch any segment indexed by the given BVH?"""
    n = boxes.shape[0]
    hit = np.zeros(n, dtype=np.bool_)
    stack = np.empty(max(lo_x.shape[0], 1), dtype=np.int32)
    aabbs = box_aabbs(boxes)
    for i in range(n):
        cand = _bvh_any(lo_x, lo_y, hi_x, hi_y, left, right, item, root,
                        aabbs[i, 0], aabbs[i, 1], aabbs[i, 2], aabbs[i, 3], stack)
        for j in cand:
            h, lo, hi = clip_segment(boxes[i], segs[j, 0], segs[j, 1], segs[j, 2], segs[j, 3])
            if h:
                hit[i] = True
                break
    return hit


@njit(cache=True)
def boxes_hit_boxes(boxes, lo_x, lo_y, hi_x, hi_y, left, right, item, root):
    """Per box: does it overlap any other box? BVH items index ``boxes``."""
    n = boxes.shape[0]
    hit = np.zeros(n, dtype=np.bool_)
    stack = np.empty(max(lo_x.shape[0], 1), dtype=np.int32)
    aabbs = box_aabbs(boxes)
    for i in range(n):
        cand = _bvh_any(lo_x, lo_y, hi_x, hi_y, left, right, item, root,
                        aabbs[i, 0], aabbs[i, 1], aabbs[i, 2], aabbs[i, 3], stack)
        for j in cand:
            if j != i and boxes_overlap(boxes[i], boxes[j]):
                hit[i] = True
                break
    return hit


@njit(cache=True)
def _occluder_table(boxes, blockers, ax, ay):
    # per blocker: nearest possible distance, unit direction to its center,
    # cosine of the angular half-span of its bounding circle (-2 = no cull)
    m = blockers.shape[0]
    tab = np.empty((m, 5))
    for k in range(m):
        b = boxes[blockers[k]]
        dx = b[0] - ax
        dy = b[1] - ay
        dc = math.hypot(dx, dy)
        rb = math.hypot(b[4], b[5])
        tab[k, 0] = dc - rb
        if dc > rb:
            tab[k, 1] = dx / dc
            tab[k, 2] = dy / dc
            r = rb / dc
            tab[k, 3] = math.sqrt(1.0 - r * r)
        else:
            tab[k, 1] = 0.0
            tab[k, 2] = 0.0
            tab[k, 3] = -2.0
        tab[k, 4] = blockers[k]
    # nearest first, so the scan can stop at the first blocker beyond the target
    return tab[np.argsort(tab[:, 0], kind="mergesort")]


@njit(cache=True, inline="always")
def _unblocked(boxes, tab, skip, ax, ay, tx, ty, dx, dy, dist):
    for k in range(tab.shape[0]):
        j = np.int64(tab[k, 4])
        if j == skip:
            continue
        if tab[k, 0] > dist + CULL_EPS:
            break
        if dx * tab[k, 1] + dy * tab[k, 2] < (tab[k, 3] - CULL_EPS) * dist:
            continue
        if sight_blocked(boxes[j], ax, ay, tx, ty):
            return False
    return True


@njit(cache=True, inline="always")
def _in_sector(dx, dy, dist, ux, uy, cos_half, direction, half):
    # dot-product test away from the rim, exact angle test near it
    if dist > 0.0:
        c = (dx * ux + dy * uy) / dist
        if c > cos_half + CULL_EPS:
            return True
        if c < cos_half - CULL_EPS:
            return False
    return min_angle(math.atan2(dy, dx), direction) <= half


@njit(cache=True)
def visible_points(points, cand, ax, ay, direction, half, radius, boxes, blockers):
    """Mask over ``cand``: in the cone and not hidden by any blocker box."""
    out = np.zeros(cand.shape[0], dtype=np.bool_)
    tab = _occluder_table(boxes, blockers, ax, ay)
    ux = math.cos(direction)
    uy = math.sin(direction)
    cos_half = math.cos(half)
    for k in range(cand.shape[0]):
        p = cand[k]
        px = points[p, 0]
        py = points[p, 1]
        dx = px - ax
        dy = py - ay
        dist = math.hypot(dx, dy)
        if dist > radius:
            continue
        if not _in_sector(dx, dy, dist, ux, uy, cos_half, direction, half):
            continue
        out[k] = _unblocked(boxes, tab, -1, ax, ay, px, py, dx, dy, dist)
    return out


@njit(cache=True)
def visible_boxes(boxes, cand, ax, ay, direction, half, radius, blockers, n_samples):
    """Mask over ``cand``: some sample point (center, then corners) is seen."""
    out = np.zeros(cand.shape[0], dtype=np.bool_)
    tab = _occluder_table(boxes, blockers, ax, ay)
    ux = math.cos(direction)
    uy = math.sin(direction)
    cos_half = math.cos(half)
    for k in range(cand.shape[0]):
        t = cand[k]
        b = boxes[t]
        for s in range(n_samples):
            if s == 0:
                px = b[0]
                py = b[1]
            else:
                px, py = box_corner(b, s - 1)
            dx = px - ax
            dy = py - ay
            dist = math.hypot(dx, dy)
            if dist > radius:
                continue
            if not _in_sector(dx, dy, dist, ux, uy, cos_half, direction, half):
                continue
            if _unblocked(boxes, tab, t, ax, ay, px, py, dx, dy, dist):
                out[k] = True
                break
    return out


@njit(cache=True)
def point_distances(points, idx, ax, ay):
    out = np.empty(idx.shape[0])
    for k in range(idx.shape[0]):
        out[k] = math.hypot(points[idx[k], 0] - ax, points[idx[k], 1] - ay)
    return out


@njit(cache=True)
def road_point_rows(points, neighbor, kinds, idx, dist, ex, ey, c, s, out):
    """Fill ``out[k]`` with (bearing, distance, neighbor_x, neighbor_y, one-hot kind)."""
    for k in range(idx.shape[0]):
        p = idx[k]
        dx = points[p, 0] - ex
        dy = points[p, 1] - ey
        out[k, 0] = math.atan2(-dx * s + dy * c, dx * c + dy * s)
        out[k, 1] = dist[k]
        nx = neighbor[p, 0]
        ny = neighbor[p, 1]
        out[k, 2] = nx * c + ny * s
        out[k, 3] = -nx * s + ny * c
        out[k, 4 + kinds[p]] = 1.0


@njit(cache=True, inline="always")
def wrap(a):
    r = (a + math.pi) % TWO_PI - math.pi
    return math.pi if r == -math.pi else r


@njit(cache=True)
def object_rows(pos, heading, speed, width, length, kinds, idx, dist, ex, ey, h, v, out):
    """Fill object feature rows (see ``ObsLayout.to_dict``) for world indices ``idx``."""
    c = math.cos(h)
    s = math.sin(h)
    ve = h + (math.pi if v < 0 else 0.0)
    for k in range(idx.shape[0]):
        j = idx[k]
        dx = pos[j, 0] - ex
        dy = pos[j, 1] - ey
        out[k, 0] = speed[j]
        out[k, 1] = min_angle(heading[j] + (math.pi if speed[j] < 0 else 0.0), ve)
        out[k, 2] = width[j]
        out[k, 3] = length[j]
        out[k, 4] = math.atan2(-dx * s + dy * c, dx * c + dy * s)
        out[k, 5] = dist[k]
        out[k, 6] = wrap(heading[j] - h)
        out[k, 7 + kinds[j]] = 1.0


@njit(cache=True)
def stop_sign_rows(points, idx, dist, ex, ey, h, out):
    c = math.cos(h)
    s = math.sin(h)
    for k in range(idx.shape[0]):
        dx = points[idx[k], 0] - ex
        dy = points[idx[k], 1] - ey
        out[k, 0] = math.atan2(-dx * s + dy * c, dx * c + dy * s)
        out[k, 1] = dist[k]


@njit(cache=True)
def sector_bounds(ax, ay, direction, half, r, pad):
    """The ``geom.cone_aabb`` construction as a (x0, y0, x1, y1) tuple."""
    if half >= math.pi:
        x0 = ax - r
        x1 = ax + r
        y0 = ay - r
        y1 = ay + r
    else:
        x0 = x1 = ax
        y0 = y1 = ay
        for e in range(6):
            if e < 2:
                phi = direction - half if e == 0 else direction + half
            else:
                phi = 0.5 * math.pi * (e - 2)
                if min_angle(phi, direction) > half:
                    continue
            px = ax + r * math.cos(phi)
            py = ay + r * math.sin(phi)
            x0 = min(x0, px)
            x1 = max(x1, px)
            y0 = min(y0, py)
            y1 = max(y1, py)
    m = pad * (1.0 + r)
    return x0 - m, y0 - m, x1 + m, y1 + m
