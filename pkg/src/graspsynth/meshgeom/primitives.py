"""Procedural watertight solids used by scenes, object proxies, and tests."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, merge_meshes

__all__ = ["box", "icosphere", "cylinder", "capsule", "extruded_polygon",
           "l_shape", "merge_meshes"]


def box(size, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned box; size may be a scalar or per-axis extents."""
    size = np.broadcast_to(np.asarray(size, dtype=np.float64), 3)
    h = size / 2.0
    c = np.asarray(center, dtype=np.float64)
    corners = np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ], dtype=np.float64)
    verts = corners * h + c
    faces = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom (z-)
        [4, 5, 6], [4, 6, 7],  # top (z+)
        [0, 1, 5], [0, 5, 4],  # y-
        [2, 3, 7], [2, 7, 6],  # y+
        [1, 2, 6], [1, 6, 5],  # x+
        [3, 0, 4], [3, 4, 7],  # x-
    ], dtype=np.int32)
    return Mesh(verts, faces, watertight=True)


def icosphere(radius: float = 1.0, subdivisions: int = 2,
              center=(0.0, 0.0, 0.0)) -> Mesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                m /= np.linalg.norm(m)
                verts.append(m)
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return Mesh(v, np.asarray(faces, dtype=np.int32), watertight=True)


def cylinder(radius: float, height: float, segments: int = 16,
             center=(0.0, 0.0, 0.0)) -> Mesh:
    """Closed cylinder along Z, centered at ``center``."""
    ang = 2 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    bot = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.concatenate([bot, top,
                            [[0, 0, -height / 2]], [[0, 0, height / 2]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [[i, j, segments + j], [i, segments + j, segments + i]]  # side
        faces += [[cb, j, i]]  # bottom cap (faces -z)
        faces += [[ct, segments + i, segments + j]]  # top cap (faces +z)
    verts = verts + np.asarray(center, dtype=np.float64)
    return Mesh(verts, np.asarray(faces, dtype=np.int32), watertight=True)


def capsule(p0, p1, radius: float, segments: int = 8, rings: int = 3) -> Mesh:
    """Capsule from p0 to p1: a tube with hemispherical caps."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    length = np.linalg.norm(axis)
    if length < 1e-12:
        return icosphere(radius, 1, center=p0)
    z = axis / length
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(ref, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)

    ang = 2 * np.pi * np.arange(segments) / segments
    circle = np.outer(np.cos(ang), x) + np.outer(np.sin(ang), y)

    verts = [p0 - z * radius]  # bottom pole
    rows = []
    # bottom hemisphere rings
    for r in range(1, rings + 1):
        phi = (np.pi / 2) * r / rings
        ring = p0 + circle * radius * np.sin(phi) - z[None, :] * radius * np.cos(phi)
        rows.append(range(len(verts), len(verts) + segments))
        verts.extend(ring)
    # top hemisphere rings
    for r in range(rings, 0, -1):
        phi = (np.pi / 2) * r / rings
        ring = p1 + circle * radius * np.sin(phi) + z[None, :] * radius * np.cos(phi)
        rows.append(range(len(verts), len(verts) + segments))
        verts.extend(ring)
    verts.append(p1 + z * radius)  # top pole

    faces = []
    first = list(rows[0])
    for i in range(segments):
        faces.append([0, first[(i + 1) % segments], first[i]])
    for a, b in zip(rows[:-1], rows[1:]):
        a, b = list(a), list(b)
        for i in range(segments):
            j = (i + 1) % segments
            faces += [[a[i], a[j], b[j]], [a[i], b[j], b[i]]]
    last = list(rows[-1])
    pole = len(verts) - 1
    for i in range(segments):
        faces.append([pole, last[i], last[(i + 1) % segments]])
    return Mesh(np.asarray(verts), np.asarray(faces, dtype=np.int32),
                watertight=True)


def extruded_polygon(polygon_xy: np.ndarray, height: float,
                     z0: float = 0.0) -> Mesh:
    """Extrude a simple CCW polygon along +Z into a watertight prism."""
    poly = np.asarray(polygon_xy, dtype=np.float64)
    n = len(poly)
    tris = _ear_clip(poly)
    bot = np.column_stack([poly, np.full(n, z0)])
    top = np.column_stack([poly, np.full(n, z0 + height)])
    verts = np.concatenate([bot, top])
    faces = []
    for a, b, c in tris:
        faces.append([a, c, b])  # bottom faces -z
        faces.append([n + a, n + b, n + c])  # top faces +z
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, j, n + j], [i, n + j, n + i]]
    return Mesh(verts, np.asarray(faces, dtype=np.int32), watertight=True)


def _ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    idx = list(range(len(poly)))
    tris = []

    def cross(o, a, b):
        return (poly[a, 0] - poly[o, 0]) * (poly[b, 1] - poly[o, 1]) - \
               (poly[a, 1] - poly[o, 1]) * (poly[b, 0] - poly[o, 0])

    def inside(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return (d1 >= 0) and (d2 >= 0) and (d3 >= 0)

    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        n = len(idx)
        for k in range(n):
            a, b, c = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            if cross(a, b, c) <= 1e-15:
                continue
            if any(inside(p, a, b, c) for p in idx if p not in (a, b, c)):
                continue
            tris.append((a, b, c))
            idx.pop(k)
            break
        else:
            raise ValueError("ear clipping failed; polygon must be simple CCW")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def l_shape(size: float = 1.0, height: float = 0.6) -> Mesh:
    """Non-convex L-shaped prism (test solid)."""
    s = size
    poly = np.array([
        [0, 0], [s, 0], [s, 0.4 * s], [0.4 * s, 0.4 * s],
        [0.4 * s, s], [0, s],
    ])
    return extruded_polygon(poly, height)
