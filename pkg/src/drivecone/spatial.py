"""Acceleration structures answering axis-aligned box queries.

``Bvh`` indexes boxes (road objects, road-edge segments) and is built by
approximate agglomerative clustering: primitives are sorted along a Morton
curve, the sorted run is split on Morton bit boundaries until buckets are
small, and clusters are merged greedily bottom-up by smallest union
perimeter, keeping only a shrinking number of clusters alive per level.

``RangeTree`` indexes points. The primary tree is a balanced split of the
x-sorted points; every node keeps its points sorted by y, stored level by
level in flat arrays so a node's list is a contiguous slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numba import njit

from .geom import AABB, Vec2

# Buckets below this size are clustered directly.
_BVH_DELTA = 4
_BVH_EPSILON = 0.2

BoxesLike = Union[np.ndarray, Sequence[AABB]]
QueryLike = Union[AABB, Sequence[float], np.ndarray]


def _as_boxes(boxes: BoxesLike) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    else:
        arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite box coordinates")
    if np.any(arr[:, 0] > arr[:, 2]) or np.any(arr[:, 1] > arr[:, 3]):
        raise ValueError("inverted box (min > max)")
    return arr


def _as_query(q: QueryLike) -> tuple[float, float, float, float]:
    if isinstance(q, AABB):
        return q.as_tuple()
    x0, y0, x1, y1 = (float(v) for v in q)
    return x0, y0, x1, y1


@njit(cache=True)
def _reduced_count(n):
    # target number of clusters surviving a bucket of n primitives
    c = 0.5 * _BVH_DELTA ** (0.5 + _BVH_EPSILON) * n ** (0.5 - _BVH_EPSILON)
    k = int(math.ceil(c))
    return max(1, k)


@njit(cache=True)
def _morton_codes(boxes):
    n = boxes.shape[0]
    cx = 0.5 * (boxes[:, 0] + boxes[:, 2])
    cy = 0.5 * (boxes[:, 1] + boxes[:, 3])
    x0, x1 = cx.min(), cx.max()
    y0, y1 = cy.min(), cy.max()
    sx = 65535.0 / (x1 - x0) if x1 > x0 else 0.0
    sy = 65535.0 / (y1 - y0) if y1 > y0 else 0.0
    codes = np.empty(n, dtype=np.int64)
    for i in range(n):
        qx = np.int64((cx[i] - x0) * sx)
        qy = np.int64((cy[i] - y0) * sy)
        code = np.int64(0)
        for b in range(16):
            code |= ((qx >> b) & 1) << (2 * b)
            code |= ((qy >> b) & 1) << (2 * b + 1)
        codes[i] = code
    return codes


@njit(cache=True)
def _combine(cstack, top, count, target, lo_x, lo_y, hi_x, hi_y, left, right, nxt):
    """Greedily merge the last ``count`` clusters on the stack down to ``target``."""
    base = top - count
    while count > target:
        best = np.inf
        bi = -1
        bj = -1
        for a in range(base, base + count):
            na = cstack[a]
            for b in range(a + 1, base + count):
                nb = cstack[b]
                w = max(hi_x[na], hi_x[nb]) - min(lo_x[na], lo_x[nb])
                h = max(hi_y[na], hi_y[nb]) - min(lo_y[na], lo_y[nb])
                cost = w + h
                if cost < best:
                    best = cost
                    bi = a
                    bj = b
        na = cstack[bi]
        nb = cstack[bj]
        node = nxt
        nxt += 1
        lo_x[node] = min(lo_x[na], lo_x[nb])
        lo_y[node] = min(lo_y[na], lo_y[nb])
        hi_x[node] = max(hi_x[na], hi_x[nb])
        hi_y[node] = max(hi_y[na], hi_y[nb])
        left[node] = na
        right[node] = nb
        cstack[bi] = node
        cstack[bj] = cstack[base + count - 1]
        count -= 1
    return count, nxt


@njit(cache=True)
def _bvh_build(boxes):
    n = boxes.shape[0]
    m = 2 * n - 1
    lo_x = np.empty(m)
    lo_y = np.empty(m)
    hi_x = np.empty(m)
    hi_y = np.empty(m)
    left = np.full(m, -1, dtype=np.int32)
    right = np.full(m, -1, dtype=np.int32)
    item = np.full(m, -1, dtype=np.int32)

    codes = _morton_codes(boxes)
    order = np.argsort(codes, kind="mergesort")
    sorted_codes = codes[order]
    for k in range(n):
        i = order[k]
        lo_x[k] = boxes[i, 0]
        lo_y[k] = boxes[i, 1]
        hi_x[k] = boxes[i, 2]
        hi_y[k] = boxes[i, 3]
        item[k] = i
    nxt = n

    cstack = np.empty(n, dtype=np.int32)
    top = 0
    seg = np.empty(n + 1, dtype=np.int64)
    nseg = 0
    tasks = np.empty((2 * n + 2, 3), dtype=np.int64)
    ntask = 0
    tasks[0, 0] = 0
    tasks[0, 1] = n
    tasks[0, 2] = 0
    ntask = 1
    while ntask > 0:
        ntask -= 1
        lo = tasks[ntask, 0]
        hi = tasks[ntask, 1]
        phase = tasks[ntask, 2]
        size = hi - lo
        if size <= _BVH_DELTA:
            for k in range(lo, hi):
                cstack[top] = k
                top += 1
            cnt, nxt = _combine(cstack, top, size, _reduced_count(size),
                                lo_x, lo_y, hi_x, hi_y, left, right, nxt)
            top = top - size + cnt
            seg[nseg] = cnt
            nseg += 1
        elif phase == 0:
            a = sorted_codes[lo]
            b = sorted_codes[hi - 1]
            if a == b:
                mid = (lo + hi) // 2
            else:
                diff = a ^ b
                bit = np.int64(1) << np.int64(63 - _clz64(diff))
                # first index whose code has the split bit set
                s, e = lo, hi - 1
                while s < e:
                    c = (s + e) // 2
                    if sorted_codes[c] & bit:
                        e = c
                    else:
                        s = c + 1
                mid = s
            tasks[ntask, 0] = lo
            tasks[ntask, 1] = hi
            tasks[ntask, 2] = 1
            tasks[ntask + 1, 0] = mid
            tasks[ntask + 1, 1] = hi
            tasks[ntask + 1, 2] = 0
            tasks[ntask + 2, 0] = lo
            tasks[ntask + 2, 1] = mid
            tasks[ntask + 2, 2] = 0
            ntask += 3
        else:
            cnt = seg[nseg - 1] + seg[nseg - 2]
            nseg -= 2
            newcnt, nxt = _combine(cstack, top, cnt, _reduced_count(size),
                                   lo_x, lo_y, hi_x, hi_y, left, right, nxt)
            top = top - cnt + newcnt
            seg[nseg] = newcnt
            nseg += 1
    cnt, nxt = _combine(cstack, top, top, 1, lo_x, lo_y, hi_x, hi_y, left, right, nxt)
    root = cstack[0]
    return lo_x, lo_y, hi_x, hi_y, left, right, item, root


@njit(cache=True)
def _clz64(x):
    n = 0
    for b in range(63, -1, -1):
        if (x >> b) & 1:
            return n
        n += 1
    return n


@njit(cache=True)
def _bvh_query(lo_x, lo_y, hi_x, hi_y, left, right, item, root, qx0, qy0, qx1, qy1):
    n_nodes = lo_x.shape[0]
    out = np.empty((n_nodes + 1) // 2, dtype=np.int64)
    k = 0
    if n_nodes == 0:
        return out[:0]
    stack = np.empty(n_nodes, dtype=np.int32)
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if lo_x[node] > qx1 or qx0 > hi_x[node] or lo_y[node] > qy1 or qy0 > hi_y[node]:
            continue
        if left[node] < 0:
            out[k] = item[node]
            k += 1
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    res = out[:k].copy()
    res.sort()
    return res


class Bvh:
    """Binary bounding volume hierarchy over axis-aligned boxes.

    Node arrays are flat; leaves have ``left == right == -1`` and ``item``
    holding the index of the input box.
    """

    def __init__(self, boxes: BoxesLike, checked: bool = False):
        # checked=True skips validation for arrays produced by trusted kernels
        arr = boxes if checked else _as_boxes(boxes)
        self.size = arr.shape[0]
        if self.size == 0:
            empty_f = np.empty(0)
            empty_i = np.empty(0, dtype=np.int32)
            self.lo_x = self.lo_y = self.hi_x = self.hi_y = empty_f
            self.left = self.right = self.item = empty_i
            self.root = -1
            return
        (self.lo_x, self.lo_y, self.hi_x, self.hi_y,
         self.left, self.right, self.item, self.root) = _bvh_build(arr)
        self.root = int(self.root)

    def __len__(self) -> int:
        return self.size

    @property
    def root_aabb(self) -> AABB | None:
        if self.root < 0:
            return None
        r = self.root
        return AABB(Vec2(self.lo_x[r], self.lo_y[r]), Vec2(self.hi_x[r], self.hi_y[r]))

    def node_aabb(self, node: int) -> tuple[float, float, float, float]:
        return (self.lo_x[node], self.lo_y[node], self.hi_x[node], self.hi_y[node])

    def query(self, q: QueryLike) -> np.ndarray:
        """Sorted ids of stored boxes intersecting the closed query box."""
        x0, y0, x1, y1 = _as_query(q)
        return _bvh_query(self.lo_x, self.lo_y, self.hi_x, self.hi_y,
                          self.left, self.right, self.item, self.root, x0, y0, x1, y1)


def bvh_build(boxes: BoxesLike) -> Bvh:
    return Bvh(boxes)


def bvh_query(bvh: Bvh, q: QueryLike) -> list[int]:
    return bvh.query(q).tolist()


@njit(cache=True)
def _lower_bound(a, lo, hi, v):
    while lo < hi:
        m = (lo + hi) // 2
        if a[m] < v:
            lo = m + 1
        else:
            hi = m
    return lo


@njit(cache=True)
def _upper_bound(a, lo, hi, v):
    while lo < hi:
        m = (lo + hi) // 2
        if a[m] <= v:
            lo = m + 1
        else:
            hi = m
    return lo


@njit(cache=True)
def _range_query(xs, level_ys, level_ids, qx0, qy0, qx1, qy1):
    n = xs.shape[0]
    i = _lower_bound(xs, 0, n, qx0)
    j = _upper_bound(xs, 0, n, qx1)
    out = np.empty(max(j - i, 0), dtype=np.int64)
    k = 0
    visits = 0
    if i >= j or qy0 > qy1:
        return out[:0], visits
    depth = level_ys.shape[0]
    stack = np.empty((2 * depth + 2, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stack[sp, 0]
        hi = stack[sp, 1]
        lev = stack[sp, 2]
        visits += 1
        if hi <= i or lo >= j:
            continue
        if i <= lo and hi <= j:
            ys = level_ys[lev]
            a = _lower_bound(ys, lo, hi, qy0)
            b = _upper_bound(ys, lo, hi, qy1)
            for t in range(a, b):
                out[k] = level_ids[lev, t]
                k += 1
            continue
        mid = (lo + hi) // 2
        stack[sp, 0] = mid
        stack[sp, 1] = hi
        stack[sp, 2] = lev + 1
        stack[sp + 1, 0] = lo
        stack[sp + 1, 1] = mid
        stack[sp + 1, 2] = lev + 1
        sp += 2
    return out[:k], visits


class RangeTree:
    """Static 2D range tree over points; ids are input positions."""

    def __init__(self, points: Union[np.ndarray, Sequence[Vec2]]):
        if isinstance(points, np.ndarray):
            pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        else:
            pts = np.array([tuple(p) for p in points], dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point coordinates")
        self.points = pts
        n = pts.shape[0]
        self.size = n
        ids = np.arange(n, dtype=np.int64)
        order = np.lexsort((ids, pts[:, 1], pts[:, 0]))
        self.xs = pts[order, 0].copy()
        ys = pts[order, 1]
        sid = order.astype(np.int64)
        depth = max(1, int(math.ceil(math.log2(n))) + 1) if n > 1 else 1
        self.level_ys = np.empty((depth, n))
        self.level_ids = np.empty((depth, n), dtype=np.int64)
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, n, dtype=np.int64)
        pos = np.arange(n, dtype=np.int64)
        for lev in range(depth):
            perm = np.lexsort((sid, ys, lo))
            self.level_ys[lev] = ys[perm]
            self.level_ids[lev] = sid[perm]
            mid = (lo + hi) // 2
            split = hi - lo > 1
            go_left = split & (pos < mid)
            go_right = split & (pos >= mid)
            hi = np.where(go_left, mid, hi)
            lo = np.where(go_right, mid, lo)

    def __len__(self) -> int:
        return self.size

    def query(self, q: QueryLike, return_visits: bool = False):
        """Ids of points inside the closed box ``q``."""
        x0, y0, x1, y1 = _as_query(q)
        if self.size == 0:
            out = np.empty(0, dtype=np.int64)
            return (out, 0) if return_visits else out
        out, visits = _range_query(self.xs, self.level_ys, self.level_ids, x0, y0, x1, y1)
        return (out, visits) if return_visits else out


def range_build(points: Union[np.ndarray, Sequence[Vec2]]) -> RangeTree:
    return RangeTree(points)


def range_query(tree: RangeTree, q: QueryLike) -> list[int]:
    return sorted(tree.query(q).tolist())
