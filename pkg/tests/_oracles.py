"""Independent brute-force oracles used by the tests.

Deliberately direct implementations (ray parity, BFS, per-vertex loops); they
must stay decoupled from the library code paths they check.
"""

import math

import numpy as np


def ray_parity_inside(point, mesh, rng, max_recast=16):
    """Inside test by counting ray crossings; re-casts on degenerate hits."""
    tri = mesh.triangles()
    origin = np.asarray(point, dtype=np.float64)
    for _ in range(max_recast):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        hits, degenerate = _count_crossings(origin, d, tri)
        if not degenerate:
            return hits % 2 == 1
    raise RuntimeError("ray parity oracle: no clean ray found")


def _count_crossings(origin, direction, tri, eps=1e-9):
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(direction, e2)
    a = np.einsum("ij,ij->i", e1, h)
    parallel = np.abs(a) < 1e-12
    a_safe = np.where(parallel, 1.0, a)
    f = 1.0 / a_safe
    s = origin - v0
    u = f * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = f * np.einsum("ij,j->i", q, direction)
    t = f * np.einsum("ij,ij->i", q, e2)
    hit = (~parallel) & (u > -eps) & (v > -eps) & (u + v < 1 + eps) & (t > eps)
    clean = (~parallel) & (u > eps) & (v > eps) & (u + v < 1 - eps) & (t > eps)
    degenerate = bool((hit & ~clean).any()) or bool(
        (hit & (np.abs(t) < 1e-7)).any()
    )
    return int(clean.sum()), degenerate


def bfs_components(n_vertices, edges, excluded):
    """Connected components by breadth-first search over an edge list."""
    adj = [[] for _ in range(n_vertices)]
    for a, b in edges:
        if not excluded[a] and not excluded[b]:
            adj[a].append(b)
            adj[b].append(a)
    seen = [False] * n_vertices
    comps = []
    for s in range(n_vertices):
        if seen[s] or excluded[s]:
            continue
        queue = [s]
        seen[s] = True
        members = []
        while queue:
            v = queue.pop(0)
            members.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        comps.append(sorted(members))
    return comps


def mean_l2(a, b):
    """Mean per-vertex L2 distance computed with a plain Python loop."""
    total = 0.0
    for p, q in zip(a, b):
        total += math.sqrt(
            (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2
        )
    return total / len(a)


def central_difference(fn, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        grad.flat[i] = (fn(xp) - fn(xm)) / (2 * h)
    return grad
