"""Mesh geometry: signed distances, offsets, adjacency, BPS encoding."""

from .mesh import Mesh, MeshError, load_obj, merge_meshes, save_obj
from .bvh import TriangleBVH
from .sdf import MeshQuery, offset_mesh, signed_distance, signed_distance_batch
from .graph import AdjacencyGraph, connected_components, subsample_mesh
from .bps import (
    BPSEncoding,
    bps_closest_local,
    bps_encode,
    rotation_z,
    sample_basis,
    DEFAULT_BASIS_COUNT,
    DEFAULT_BASIS_RADIUS,
    DEFAULT_BASIS_SEED,
)
from . import primitives

__all__ = [
    "Mesh", "MeshError", "load_obj", "save_obj", "merge_meshes",
    "TriangleBVH", "MeshQuery", "offset_mesh", "signed_distance",
    "signed_distance_batch", "AdjacencyGraph", "connected_components",
    "subsample_mesh", "BPSEncoding", "bps_encode", "bps_closest_local",
    "rotation_z", "sample_basis", "primitives",
    "DEFAULT_BASIS_COUNT", "DEFAULT_BASIS_RADIUS", "DEFAULT_BASIS_SEED",
]
