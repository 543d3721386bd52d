"""Indexed triangle meshes: validation, watertightness, OBJ I/O.

Conventions: right-handed coordinates, Z up, meters.  Faces are
counter-clockwise when seen from outside (outward normals).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Mesh", "MeshError", "load_obj", "save_obj", "merge_meshes"]

_DEGENERATE_AREA = 1e-14


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Triangle surface. ``watertight`` asserts closed manifold topology."""

    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int32
    watertight: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError("faces must be (m, 3)")
        if len(self.faces) and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise MeshError("face index out of range")
        if len(self.faces):
            areas = self.face_areas()
            if (areas < _DEGENERATE_AREA).any():
                bad = int(np.argmin(areas))
                raise MeshError(f"degenerate (zero-area) face {bad}")
        if self.watertight and not _is_watertight(self.faces):
            raise MeshError("mesh marked watertight but edges are not 2-manifold")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(m, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        t = self.triangles()
        return 0.5 * np.linalg.norm(
            np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1
        )

    def face_normals(self) -> np.ndarray:
        t = self.triangles()
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        lens = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.maximum(lens, 1e-30)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_radius(self) -> float:
        c = self.centroid()
        return float(np.linalg.norm(self.vertices - c, axis=1).max())

    def edges(self) -> np.ndarray:
        """Unique undirected edges, each row sorted, lexicographic order."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0)
        return e

    def transformed(self, rotation: np.ndarray | None = None,
                    translation: np.ndarray | None = None) -> "Mesh":
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return Mesh(v, self.faces.copy(), watertight=self.watertight)

    def copy(self) -> "Mesh":
        return Mesh(self.vertices.copy(), self.faces.copy(), self.watertight)


def _is_watertight(faces: np.ndarray) -> bool:
    """Every directed edge appears exactly once and is paired by its reverse."""
    if len(faces) == 0:
        return False
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    keys = directed[:, 0].astype(np.int64) * (directed.max() + 1) + directed[:, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    if (counts != 1).any():
        return False
    rev = directed[:, 1].astype(np.int64) * (directed.max() + 1) + directed[:, 0]
    return np.isin(rev, uniq).all()


def merge_meshes(parts: list[Mesh]) -> Mesh:
    """Concatenate parts into one mesh (distance to union = min over parts)."""
    if not parts:
        raise MeshError("nothing to merge")
    offsets = np.cumsum([0] + [p.n_vertices for p in parts[:-1]])
    verts = np.concatenate([p.vertices for p in parts])
    faces = np.concatenate([p.faces + off for p, off in zip(parts, offsets)])
    return Mesh(verts, faces, watertight=all(p.watertight for p in parts))


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# graspsynth mesh: {mesh.n_vertices} verts {mesh.n_faces} faces\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_obj(path, watertight: bool = False) -> Mesh:
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise MeshError(f"no vertices in {path}")
    return Mesh(np.asarray(verts), np.asarray(faces, dtype=np.int32), watertight)
