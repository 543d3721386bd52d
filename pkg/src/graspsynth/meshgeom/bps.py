"""Basis-point-set object encoding.

A fixed, seeded point cloud in the unit ball; an object is encoded by the
per-basis-point distance to the object's surface after centering the object
on the basis centroid and rotating it about the vertical axis.  Points inside
the object encode as zero (exterior distance), so encodings are >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshError
from .sdf import MeshQuery

__all__ = ["BPSEncoding", "sample_basis", "bps_encode", "bps_closest_local",
           "rotation_z", "DEFAULT_BASIS_COUNT", "DEFAULT_BASIS_SEED",
           "DEFAULT_BASIS_RADIUS"]

DEFAULT_BASIS_COUNT = 1024
DEFAULT_BASIS_SEED = 20240901
DEFAULT_BASIS_RADIUS = 0.25  # meters; desk-scale objects


@dataclass
class BPSEncoding:
    basis: np.ndarray  # (n_b, 3)
    distances: np.ndarray  # (n_b,) >= 0
    alpha: float  # rotation about vertical applied to the object

    def __post_init__(self):
        if self.distances.shape[0] != self.basis.shape[0]:
            raise ValueError("distances length must equal basis point count")
        if (self.distances < 0).any():
            raise ValueError("encoding distances must be non-negative")


def sample_basis(count: int = DEFAULT_BASIS_COUNT,
                 seed: int = DEFAULT_BASIS_SEED,
                 radius: float = DEFAULT_BASIS_RADIUS) -> np.ndarray:
    """Uniform ball samples, re-centered so the basis centroid is the origin."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / 3.0)
    pts = direction * r[:, None]
    return pts - pts.mean(axis=0)


def rotation_z(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _centered_rotated(obj: Mesh, alpha: float) -> Mesh:
    if obj.n_vertices == 0:
        raise MeshError("cannot encode an empty mesh")
    centered = obj.vertices - obj.vertices.mean(axis=0)
    return Mesh(centered @ rotation_z(alpha).T, obj.faces, watertight=obj.watertight)


def bps_encode(obj: Mesh, basis: np.ndarray, alpha: float) -> BPSEncoding:
    rotated = _centered_rotated(obj, alpha)
    q = MeshQuery(rotated, require_watertight=False)
    dist, _, _ = q.unsigned(basis)
    if rotated.watertight:
        dist[q.contains(basis)] = 0.0
    return BPSEncoding(basis=np.asarray(basis, dtype=np.float64),
                       distances=dist, alpha=float(alpha))


def bps_closest_local(obj: Mesh, basis: np.ndarray, alpha: float):
    """Closest surface points in the centered object frame, plus signs.

    Used to linearize the encoding around the current rotation: the distance
    for basis point b is max(0, s * |R(alpha) c - b|) with c the closest point
    in the object's centered frame and s = -1 when b is inside the object.
    """
    rotated = _centered_rotated(obj, alpha)
    q = MeshQuery(rotated, require_watertight=False)
    _, closest, _ = q.unsigned(basis)
    sign = np.ones(len(basis))
    if rotated.watertight:
        sign[q.contains(basis)] = -1.0
    c_local = closest @ rotation_z(alpha)  # inverse rotation = transpose
    return c_local, sign
