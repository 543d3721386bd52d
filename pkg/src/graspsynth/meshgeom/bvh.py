"""BVH over mesh triangles: closest-point queries and winding numbers.

The tree is built once per mesh (median split on the longest centroid axis)
and flattened into arrays so the numba query kernels can traverse it with an
explicit stack.  Winding numbers come in two flavors: exact solid-angle
summation over every triangle, and a hierarchical evaluation that uses a
per-node dipole (area-weighted normal at the area centroid) for far nodes and
exact solid angles near the query point.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_LEAF_SIZE = 8
_STACK_DEPTH = 64
FAR_FIELD_BETA = 2.0


@njit(cache=True, inline="always")
def _closest_point_on_tri(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Ericson's closest-point-on-triangle; returns the point coordinates."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az

    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az

    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz

    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (
            bx + w * (cx - bx),
            by + w * (cy - by),
            bz + w * (cz - bz),
        )

    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (
        ax + abx * v + acx * w,
        ay + aby * v + acy * w,
        az + abz * v + acz * w,
    )


@njit(cache=True, inline="always")
def _aabb_dist_sq(px, py, pz, minx, miny, minz, maxx, maxy, maxz):
    d = 0.0
    if px < minx:
        d += (minx - px) ** 2
    elif px > maxx:
        d += (px - maxx) ** 2
    if py < miny:
        d += (miny - py) ** 2
    elif py > maxy:
        d += (py - maxy) ** 2
    if pz < minz:
        d += (minz - pz) ** 2
    elif pz > maxz:
        d += (pz - maxz) ** 2
    return d


@njit(cache=True)
def _closest_batch(points, tri, nmin, nmax, left, right, start, count, order,
                   out_closest, out_tri, out_dsq):
    n = points.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    for q in range(n):
        px, py, pz = points[q, 0], points[q, 1], points[q, 2]
        best = 1e300
        bestx = besty = bestz = 0.0
        best_t = -1
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _aabb_dist_sq(px, py, pz, nmin[node, 0], nmin[node, 1],
                             nmin[node, 2], nmax[node, 0], nmax[node, 1],
                             nmax[node, 2]) >= best:
                continue
            if count[node] > 0:  # leaf
                for k in range(start[node], start[node] + count[node]):
                    t = order[k]
                    qx, qy, qz = _closest_point_on_tri(
                        px, py, pz,
                        tri[t, 0, 0], tri[t, 0, 1], tri[t, 0, 2],
                        tri[t, 1, 0], tri[t, 1, 1], tri[t, 1, 2],
                        tri[t, 2, 0], tri[t, 2, 1], tri[t, 2, 2],
                    )
                    dsq = (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
                    if dsq < best:
                        best = dsq
                        bestx, besty, bestz = qx, qy, qz
                        best_t = t
            else:
                l, r = left[node], right[node]
                dl = _aabb_dist_sq(px, py, pz, nmin[l, 0], nmin[l, 1],
                                   nmin[l, 2], nmax[l, 0], nmax[l, 1],
                                   nmax[l, 2])
                dr = _aabb_dist_sq(px, py, pz, nmin[r, 0], nmin[r, 1],
                                   nmin[r, 2], nmax[r, 0], nmax[r, 1],
                                   nmax[r, 2])
                if dl <= dr:  # near child last so it pops first
                    if dr < best:
                        stack[top] = r
                        top += 1
                    if dl < best:
                        stack[top] = l
                        top += 1
                else:
                    if dl < best:
                        stack[top] = l
                        top += 1
                    if dr < best:
                        stack[top] = r
                        top += 1
        out_closest[q, 0] = bestx
        out_closest[q, 1] = besty
        out_closest[q, 2] = bestz
        out_tri[q] = best_t
        out_dsq[q] = best


@njit(cache=True, inline="always")
def _solid_angle(px, py, pz, tri, t):
    ax, ay, az = tri[t, 0, 0] - px, tri[t, 0, 1] - py, tri[t, 0, 2] - pz
    bx, by, bz = tri[t, 1, 0] - px, tri[t, 1, 1] - py, tri[t, 1, 2] - pz
    cx, cy, cz = tri[t, 2, 0] - px, tri[t, 2, 1] - py, tri[t, 2, 2] - pz
    la = math.sqrt(ax * ax + ay * ay + az * az)
    lb = math.sqrt(bx * bx + by * by + bz * bz)
    lc = math.sqrt(cx * cx + cy * cy + cz * cz)
    det = (ax * (by * cz - bz * cy)
           - ay * (bx * cz - bz * cx)
           + az * (bx * cy - by * cx))
    dab = ax * bx + ay * by + az * bz
    dbc = bx * cx + by * cy + bz * cz
    dca = cx * ax + cy * ay + cz * az
    denom = la * lb * lc + dab * lc + dbc * la + dca * lb
    return 2.0 * math.atan2(det, denom)


@njit(cache=True)
def _winding_exact_batch(points, tri, out):
    n = points.shape[0]
    m = tri.shape[0]
    for q in range(n):
        px, py, pz = points[q, 0], points[q, 1], points[q, 2]
        acc = 0.0
        for t in range(m):
            acc += _solid_angle(px, py, pz, tri, t)
        out[q] = acc / (4.0 * math.pi)


@njit(cache=True)
def _winding_fast_batch(points, tri, nmin, nmax, left, right, start, count,
                        order, dipole, center, radius, beta, out):
    n = points.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    inv4pi = 1.0 / (4.0 * math.pi)
    for q in range(n):
        px, py, pz = points[q, 0], points[q, 1], points[q, 2]
        acc = 0.0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            dx = center[node, 0] - px
            dy = center[node, 1] - py
            dz = center[node, 2] - pz
            d2 = dx * dx + dy * dy + dz * dz
            rb = radius[node] * beta
            if d2 > rb * rb:
                d3 = d2 * math.sqrt(d2)
                acc += (dipole[node, 0] * dx + dipole[node, 1] * dy
                        + dipole[node, 2] * dz) / d3
            elif count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    acc += _solid_angle(px, py, pz, tri, order[k])
            else:
                stack[top] = left[node]
                top += 1
                stack[top] = right[node]
                top += 1
        out[q] = acc * inv4pi


class TriangleBVH:
    """Flattened BVH over a triangle soup, with dipole data for fast winding."""

    def __init__(self, triangles: np.ndarray):
        tri = np.ascontiguousarray(triangles, dtype=np.float64)
        if tri.ndim != 3 or tri.shape[1:] != (3, 3):
            raise ValueError("triangles must be (m, 3, 3)")
        self.tri = tri
        m = tri.shape[0]
        cents = tri.mean(axis=1)
        order = np.arange(m, dtype=np.int64)

        nmin, nmax, left, right, start, count = [], [], [], [], [], []

        def new_node():
            nmin.append(np.zeros(3))
            nmax.append(np.zeros(3))
            left.append(-1)
            right.append(-1)
            start.append(0)
            count.append(0)
            return len(nmin) - 1

        # iterative median-split build
        root = new_node()
        todo = [(root, 0, m)]
        while todo:
            node, lo, hi = todo.pop()
            sel = order[lo:hi]
            pts = tri[sel].reshape(-1, 3)
            nmin[node] = pts.min(axis=0)
            nmax[node] = pts.max(axis=0)
            if hi - lo <= _LEAF_SIZE:
                start[node] = lo
                count[node] = hi - lo
                continue
            c = cents[sel]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = (hi - lo) // 2
            part = np.argpartition(c[:, axis], mid, kind="introselect")
            order[lo:hi] = sel[part]
            l, r = new_node(), new_node()
            left[node] = l
            right[node] = r
            todo.append((l, lo, lo + mid))
            todo.append((r, lo + mid, hi))

        self.nmin = np.asarray(nmin)
        self.nmax = np.asarray(nmax)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.count = np.asarray(count, dtype=np.int64)
        self.order = order

        # per-node dipoles: area-weighted normal, area centroid, radius
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        areavec = 0.5 * np.cross(e1, e2)
        areas = np.linalg.norm(areavec, axis=1)
        nn = len(nmin)
        self.dipole = np.zeros((nn, 3))
        self.center = np.zeros((nn, 3))
        self.radius = np.zeros(nn)
        # children were appended after parents, so reverse order aggregates up
        for node in range(nn - 1, -1, -1):
            if self.count[node] > 0:
                sel = self.order[self.start[node]:self.start[node] + self.count[node]]
                a = areas[sel]
                asum = a.sum()
                self.dipole[node] = areavec[sel].sum(axis=0)
                if asum > 0:
                    self.center[node] = (cents[sel] * a[:, None]).sum(axis=0) / asum
                else:
                    self.center[node] = cents[sel].mean(axis=0)
            else:
                l, r = self.left[node], self.right[node]
                self.dipole[node] = self.dipole[l] + self.dipole[r]
                al = np.linalg.norm(self.dipole[l])
                ar = np.linalg.norm(self.dipole[r])
                wsum = al + ar
                if wsum > 1e-30:
                    self.center[node] = (self.center[l] * al + self.center[r] * ar) / wsum
                else:
                    self.center[node] = 0.5 * (self.center[l] + self.center[r])
            corners = self.tri[self.order[self.start[node]:self.start[node] + self.count[node]]] \
                if self.count[node] > 0 else None
            # radius covers the whole node AABB around the dipole center
            far = np.maximum(np.abs(self.nmin[node] - self.center[node]),
                             np.abs(self.nmax[node] - self.center[node]))
            self.radius[node] = float(np.linalg.norm(far))

    def closest(self, points: np.ndarray):
        """Per point: unsigned distance, closest surface point, triangle id."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        n = pts.shape[0]
        closest = np.empty((n, 3))
        tri_idx = np.empty(n, dtype=np.int64)
        dsq = np.empty(n)
        _closest_batch(pts, self.tri, self.nmin, self.nmax, self.left,
                       self.right, self.start, self.count, self.order,
                       closest, tri_idx, dsq)
        return np.sqrt(dsq), closest, tri_idx

    def winding_exact(self, points: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.empty(pts.shape[0])
        _winding_exact_batch(pts, self.tri, out)
        return out

    def winding(self, points: np.ndarray, beta: float = FAR_FIELD_BETA) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        out = np.empty(pts.shape[0])
        _winding_fast_batch(pts, self.tri, self.nmin, self.nmax, self.left,
                            self.right, self.start, self.count, self.order,
                            self.dipole, self.center, self.radius, beta, out)
        return out
