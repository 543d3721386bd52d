"""Differentiable articulated body and right-hand stand-ins.

A 22-joint body tree (pelvis root + 21 posed joints) carries 15 additional
right-hand finger joints so the full-finger pose can be applied to the body
directly.  The surface is a low-poly capsule skin with fixed single-influence
linear blend weights; topology and landmark index sets are fixed at build
time.  The hand model reuses the body's right-hand geometry vertex-for-vertex
(same count, same order), which makes hand-to-body vertex matching exact by
construction when wrist placements agree.

Conventions: meters, Z up, body faces +X in the canonical T-pose, pelvis at
the origin.  Global orientation is yaw-pitch-roll, applied intrinsically as
Z (yaw) then Y (pitch) then X (roll).  Joint rotations are axis-angle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .meshgeom import Mesh, save_obj
from .meshgeom.primitives import capsule, merge_meshes

__all__ = [
    "BodyParams", "HandParams", "BodySurface", "BodyModel", "HandModel",
    "build_models", "body_forward", "hand_forward", "head_vectors",
    "lowest_vertex_height", "rodrigues", "yaw_pitch_roll_matrix",
    "N_BODY_JOINTS", "N_FINGER_JOINTS", "save_model_manifest",
]

N_BODY_JOINTS = 21
N_FINGER_JOINTS = 15

_BODY_JOINTS = [
    # name, parent index (into this list, pelvis = 0), rest position
    ("pelvis", -1, (0.0, 0.0, 0.0)),
    ("left_hip", 0, (0.0, 0.09, -0.06)),
    ("right_hip", 0, (0.0, -0.09, -0.06)),
    ("spine1", 0, (0.0, 0.0, 0.11)),
    ("left_knee", 1, (0.0, 0.10, -0.48)),
    ("right_knee", 2, (0.0, -0.10, -0.48)),
    ("spine2", 3, (0.0, 0.0, 0.24)),
    ("left_ankle", 4, (0.0, 0.105, -0.88)),
    ("right_ankle", 5, (0.0, -0.105, -0.88)),
    ("spine3", 6, (0.0, 0.0, 0.37)),
    ("left_foot", 7, (0.14, 0.105, -0.95)),
    ("right_foot", 8, (0.14, -0.105, -0.95)),
    ("neck", 9, (0.0, 0.0, 0.50)),
    ("left_collar", 9, (0.0, 0.065, 0.44)),
    ("right_collar", 9, (0.0, -0.065, 0.44)),
    ("head", 12, (0.0, 0.0, 0.60)),
    ("left_shoulder", 13, (0.0, 0.16, 0.46)),
    ("right_shoulder", 14, (0.0, -0.16, 0.46)),
    ("left_elbow", 16, (0.0, 0.44, 0.46)),
    ("right_elbow", 17, (0.0, -0.44, 0.46)),
    ("left_wrist", 18, (0.0, 0.70, 0.46)),
    ("right_wrist", 19, (0.0, -0.70, 0.46)),
]

_FINGERS = ["index", "middle", "ring", "pinky", "thumb"]

# hand geometry in wrist-local coordinates (right hand, arm along -Y,
# palm facing -Z, thumb toward +X)
_MCP_OFFSET = {
    "index": (0.026, -0.088, 0.0),
    "middle": (0.0085, -0.090, 0.0),
    "ring": (-0.0085, -0.088, 0.0),
    "pinky": (-0.026, -0.082, 0.0),
    "thumb": (0.028, -0.025, -0.004),
}
_FINGER_DIR = {
    "index": (0.0, -1.0, 0.0),
    "middle": (0.0, -1.0, 0.0),
    "ring": (0.0, -1.0, 0.0),
    "pinky": (0.0, -1.0, 0.0),
    "thumb": (0.66, -0.75, 0.0),
}
_SEGMENT_LENGTHS = {
    "index": (0.034, 0.023, 0.019),
    "middle": (0.036, 0.025, 0.020),
    "ring": (0.033, 0.022, 0.018),
    "pinky": (0.027, 0.018, 0.015),
    "thumb": (0.031, 0.023, 0.020),
}
_FINGER_RADIUS = 0.0095
_PALM_SPAN = ((0.0, -0.012, 0.0), (0.0, -0.080, 0.0))
_PALM_RADIUS = 0.034


def rodrigues(rotvec: np.ndarray) -> np.ndarray:
    """Axis-angle (..., 3) to rotation matrices (..., 3, 3)."""
    r = np.asarray(rotvec, dtype=np.float64)
    theta = np.linalg.norm(r, axis=-1, keepdims=True)
    small = theta[..., 0] < 1e-12
    axis = np.where(theta > 1e-12, r / np.where(theta > 1e-12, theta, 1.0), 0.0)
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zero = np.zeros_like(x)
    K = np.stack([
        np.stack([zero, -z, y], axis=-1),
        np.stack([z, zero, -x], axis=-1),
        np.stack([-y, x, zero], axis=-1),
    ], axis=-2)
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    eye = np.broadcast_to(np.eye(3), K.shape)
    R = eye + s * K + (1.0 - c) * (K @ K)
    R[small] = np.eye(3)
    return R


def yaw_pitch_roll_matrix(ypr) -> np.ndarray:
    """Intrinsic Z (yaw) -> Y (pitch) -> X (roll)."""
    yaw, pitch, roll = float(ypr[0]), float(ypr[1]), float(ypr[2])
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    cx, sx = np.cos(roll), np.sin(roll)
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1.0]])
    Ry = np.array([[cy, 0, sy], [0, 1.0, 0], [-sy, 0, cy]])
    Rx = np.array([[1.0, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return Rz @ Ry @ Rx


def _check_axis_angle(arr: np.ndarray, what: str) -> None:
    mags = np.linalg.norm(arr, axis=-1)
    if (mags > np.pi + 1e-9).any():
        raise ValueError(f"{what}: axis-angle magnitude exceeds pi")


@dataclass
class BodyParams:
    theta_b: np.ndarray  # (21, 3) axis-angle
    theta_h: np.ndarray  # (15, 3) axis-angle, right-hand fingers
    t_b: np.ndarray  # (3,) pelvis translation
    rot_b: np.ndarray  # (3,) yaw-pitch-roll

    def __post_init__(self):
        self.theta_b = np.asarray(self.theta_b, dtype=np.float64).reshape(21, 3)
        self.theta_h = np.asarray(self.theta_h, dtype=np.float64).reshape(15, 3)
        self.t_b = np.asarray(self.t_b, dtype=np.float64).reshape(3)
        self.rot_b = np.asarray(self.rot_b, dtype=np.float64).reshape(3)
        _check_axis_angle(self.theta_b, "theta_b")
        _check_axis_angle(self.theta_h, "theta_h")
        if (self.rot_b <= -np.pi - 1e-9).any() or (self.rot_b > np.pi + 1e-9).any():
            raise ValueError("rot_b components must lie in (-pi, pi]")

    @classmethod
    def zero(cls) -> "BodyParams":
        return cls(np.zeros((21, 3)), np.zeros((15, 3)), np.zeros(3), np.zeros(3))


@dataclass
class HandParams:
    theta_h: np.ndarray  # (15, 3) axis-angle
    t_h: np.ndarray  # (3,) wrist translation
    rot_h: np.ndarray  # (3,) wrist orientation, axis-angle

    def __post_init__(self):
        self.theta_h = np.asarray(self.theta_h, dtype=np.float64).reshape(15, 3)
        self.t_h = np.asarray(self.t_h, dtype=np.float64).reshape(3)
        self.rot_h = np.asarray(self.rot_h, dtype=np.float64).reshape(3)
        _check_axis_angle(self.theta_h, "theta_h")

    @classmethod
    def zero(cls) -> "HandParams":
        return cls(np.zeros((15, 3)), np.zeros(3), np.zeros(3))


@dataclass
class BodySurface:
    """Posed body vertices plus the model's fixed topology and landmarks."""

    vertices: np.ndarray
    model: "BodyModel"
    joint_rotations: np.ndarray = field(repr=False)  # (J, 3, 3) global
    joint_positions: np.ndarray = field(repr=False)  # (J, 3) global

    @property
    def faces(self) -> np.ndarray:
        return self.model.faces

    def mesh(self) -> Mesh:
        return Mesh(self.vertices.copy(), self.model.faces, watertight=True)

    def hand_vertices(self) -> np.ndarray:
        return self.vertices[self.model.hand_subset]


@dataclass
class BodyModel:
    joint_names: list[str]
    parents: np.ndarray  # (J,)
    rest_pos: np.ndarray  # (J, 3)
    template: np.ndarray  # (n, 3)
    faces: np.ndarray  # (m, 3)
    skin_joint: np.ndarray  # (n,) single-influence LBS
    hand_subset: np.ndarray  # (nh,) body vertex ids, hand ordering
    wrist_ring: np.ndarray  # (k,) indices into hand ordering
    head_back: int  # body vertex id
    head_front: int  # body vertex id
    lowest_candidates: np.ndarray  # (n,) vertex ids eligible as lowest point

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def n_vertices(self) -> int:
        return len(self.template)

    def template_mesh(self) -> Mesh:
        return Mesh(self.template.copy(), self.faces, watertight=True)


@dataclass
class HandModel:
    joint_names: list[str]
    parents: np.ndarray  # (16,)
    rest_pos: np.ndarray  # (16, 3) wrist at origin
    template: np.ndarray  # (nh, 3) wrist-local
    faces: np.ndarray
    skin_joint: np.ndarray  # (nh,)
    wrist_ring: np.ndarray

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def n_vertices(self) -> int:
        return len(self.template)


def _hand_geometry():
    """Capsule soup for the right hand in wrist-local coordinates.

    Returns (parts, part_joint_names, joint_names, joint_parents, joint_pos).
    """
    joint_names = ["wrist"]
    joint_parents = [-1]
    joint_pos = [np.zeros(3)]
    parts: list[Mesh] = []
    part_joint: list[str] = []

    palm = capsule(np.asarray(_PALM_SPAN[0]), np.asarray(_PALM_SPAN[1]),
                   _PALM_RADIUS, segments=6, rings=2)
    parts.append(palm)
    part_joint.append("wrist")

    for finger in _FINGERS:
        base = np.asarray(_MCP_OFFSET[finger])
        d = np.asarray(_FINGER_DIR[finger])
        d = d / np.linalg.norm(d)
        lengths = _SEGMENT_LENGTHS[finger]
        prev_joint = "wrist"
        pos = base
        for seg in range(3):
            jname = f"{finger}{seg + 1}"
            joint_names.append(jname)
            joint_parents.append(joint_names.index(prev_joint))
            joint_pos.append(pos.copy())
            end = pos + d * lengths[seg]
            parts.append(capsule(pos, end, _FINGER_RADIUS, segments=4, rings=1))
            part_joint.append(jname)
            prev_joint = jname
            pos = end
    return parts, part_joint, joint_names, joint_parents, np.asarray(joint_pos)


def _body_capsules(rest: dict[str, np.ndarray]):
    """(mesh part, skin joint name) pairs for the torso, head and limbs."""
    spec = [
        # from, to, radius, segments, rings, skin joint
        ("pelvis", "spine2", 0.125, 8, 3, "pelvis"),
        ("spine2", "neck", 0.115, 8, 3, "spine2"),
        ("left_hip", "right_hip", 0.095, 8, 2, "pelvis"),
        ("neck", "head_top", 0.085, 8, 3, "head"),
        ("left_collar", "left_shoulder", 0.05, 6, 1, "left_collar"),
        ("right_collar", "right_shoulder", 0.05, 6, 1, "right_collar"),
        ("left_hip", "left_knee", 0.07, 8, 2, "left_hip"),
        ("right_hip", "right_knee", 0.07, 8, 2, "right_hip"),
        ("left_knee", "left_ankle", 0.055, 8, 2, "left_knee"),
        ("right_knee", "right_ankle", 0.055, 8, 2, "right_knee"),
        ("left_ankle", "left_foot", 0.04, 8, 2, "left_ankle"),
        ("right_ankle", "right_foot", 0.04, 8, 2, "right_ankle"),
        ("left_shoulder", "left_elbow", 0.045, 6, 2, "left_shoulder"),
        ("right_shoulder", "right_elbow", 0.045, 6, 2, "right_shoulder"),
        ("left_elbow", "left_wrist", 0.04, 6, 2, "left_elbow"),
        ("right_elbow", "right_wrist", 0.04, 6, 2, "right_elbow"),
        ("left_wrist", "left_palm_end", 0.034, 6, 2, "left_wrist"),
    ]
    rest = dict(rest)
    rest["head_top"] = rest["head"] + np.array([0.0, 0.0, 0.12])
    rest["left_palm_end"] = rest["left_wrist"] + np.array([0.0, 0.068, 0.0])
    parts, part_joint = [], []
    for a, b, radius, seg, rings, joint in spec:
        parts.append(capsule(rest[a], rest[b], radius, segments=seg, rings=rings))
        part_joint.append(joint)
    return parts, part_joint


@lru_cache(maxsize=1)
def build_models() -> tuple[BodyModel, HandModel]:
    """Construct the canonical body and hand stand-ins (deterministic)."""
    body_names = [j[0] for j in _BODY_JOINTS]
    body_parents = [j[1] for j in _BODY_JOINTS]
    body_rest = {j[0]: np.asarray(j[2], dtype=np.float64) for j in _BODY_JOINTS}

    h_parts, h_part_joint, h_joint_names, h_joint_parents, h_joint_pos = \
        _hand_geometry()

    # body joint table: 22 body joints + 15 finger joints (skip hand "wrist")
    joint_names = list(body_names)
    parents = list(body_parents)
    rest_list = [body_rest[n] for n in body_names]
    wrist_world = body_rest["right_wrist"]
    for name, parent, pos in zip(h_joint_names[1:], h_joint_parents[1:],
                                 h_joint_pos[1:]):
        joint_names.append(name)
        pname = h_joint_names[parent]
        parents.append(joint_names.index("right_wrist") if pname == "wrist"
                       else joint_names.index(pname))
        rest_list.append(wrist_world + pos)
    rest_pos = np.asarray(rest_list)

    b_parts, b_part_joint = _body_capsules(body_rest)

    # hand parts placed at the body wrist become the body's right-hand subset
    placed_hand_parts = [
        Mesh(p.vertices + wrist_world, p.faces, watertight=True)
        for p in h_parts
    ]
    hand_part_joint_body = ["right_wrist" if j == "wrist" else j
                            for j in h_part_joint]

    all_parts = b_parts + placed_hand_parts
    all_joints = b_part_joint + hand_part_joint_body
    merged = merge_meshes(all_parts)

    skin = np.zeros(merged.n_vertices, dtype=np.int64)
    offset = 0
    spans = []
    for part, joint in zip(all_parts, all_joints):
        spans.append((offset, offset + part.n_vertices, joint))
        skin[offset:offset + part.n_vertices] = joint_names.index(joint)
        offset += part.n_vertices

    hand_start = sum(p.n_vertices for p in b_parts)
    hand_count = sum(p.n_vertices for p in placed_hand_parts)
    hand_subset = np.arange(hand_start, hand_start + hand_count, dtype=np.int64)

    # wrist ring: palm-capsule vertices nearest the wrist joint
    palm_local = h_parts[0].vertices
    dist_to_wrist = np.linalg.norm(palm_local, axis=1)
    ring_size = 7
    wrist_ring = np.sort(np.argsort(dist_to_wrist)[:ring_size]).astype(np.int64)

    # head landmarks: extreme +X / -X vertices of the head capsule
    head_span = next(s for s in spans if s[2] == "head")
    head_ids = np.arange(head_span[0], head_span[1])
    head_verts = merged.vertices[head_ids]
    head_front = int(head_ids[np.argmax(head_verts[:, 0])])
    head_back = int(head_ids[np.argmin(head_verts[:, 0])])
    if np.allclose(merged.vertices[head_front], merged.vertices[head_back]):
        raise ValueError("head landmarks coincide; bad head capsule")

    body = BodyModel(
        joint_names=joint_names,
        parents=np.asarray(parents, dtype=np.int64),
        rest_pos=rest_pos,
        template=merged.vertices,
        faces=merged.faces,
        skin_joint=skin,
        hand_subset=hand_subset,
        wrist_ring=wrist_ring,
        head_back=head_back,
        head_front=head_front,
        lowest_candidates=np.arange(merged.n_vertices, dtype=np.int64),
    )

    hand_merged = merge_meshes(h_parts)
    hand_skin = np.zeros(hand_merged.n_vertices, dtype=np.int64)
    off = 0
    for part, joint in zip(h_parts, h_part_joint):
        hand_skin[off:off + part.n_vertices] = h_joint_names.index(joint)
        off += part.n_vertices
    hand = HandModel(
        joint_names=h_joint_names,
        parents=np.asarray(h_joint_parents, dtype=np.int64),
        rest_pos=h_joint_pos,
        template=hand_merged.vertices,
        faces=hand_merged.faces,
        skin_joint=hand_skin,
        wrist_ring=wrist_ring,
    )
    return body, hand


def _fk_global(parents, rest_pos, local_R, root_R, root_t):
    """Compose local joint rotations down the tree.

    Returns global rotations (J, 3, 3) and joint positions (J, 3).
    """
    J = len(parents)
    Rg = np.empty((J, 3, 3))
    tg = np.empty((J, 3))
    Rg[0] = root_R
    tg[0] = root_t + root_R @ rest_pos[0]
    for j in range(1, J):
        p = parents[j]
        off = rest_pos[j] - rest_pos[p]
        Rg[j] = Rg[p] @ local_R[j]
        tg[j] = Rg[p] @ off + tg[p]
    return Rg, tg


def _lbs(template, rest_pos, skin_joint, Rg, tg):
    local = template - rest_pos[skin_joint]
    rotated = np.einsum("njk,nk->nj", Rg[skin_joint], local)
    return rotated + tg[skin_joint]


def body_forward(params: BodyParams, model: BodyModel | None = None) -> BodySurface:
    """Pose the body: vertices, global joint transforms, fixed topology."""
    if model is None:
        model, _ = build_models()
    J = model.n_joints
    local_R = np.empty((J, 3, 3))
    local_R[0] = np.eye(3)
    theta = np.concatenate([params.theta_b, params.theta_h])
    local_R[1:] = rodrigues(theta)
    root_R = yaw_pitch_roll_matrix(params.rot_b)
    Rg, tg = _fk_global(model.parents, model.rest_pos, local_R, root_R, params.t_b)
    verts = _lbs(model.template, model.rest_pos, model.skin_joint, Rg, tg)
    return BodySurface(vertices=verts, model=model, joint_rotations=Rg,
                       joint_positions=tg)


def hand_forward(params: HandParams, model: HandModel | None = None) -> np.ndarray:
    """Pose the hand; returns world-frame vertices (wrist-rooted tree)."""
    if model is None:
        _, model = build_models()
    J = model.n_joints
    local_R = np.empty((J, 3, 3))
    local_R[0] = np.eye(3)
    local_R[1:] = rodrigues(params.theta_h)
    root_R = rodrigues(params.rot_h)
    Rg, tg = _fk_global(model.parents, model.rest_pos, local_R, root_R, params.t_h)
    return _lbs(model.template, model.rest_pos, model.skin_joint, Rg, tg)


def head_vectors(surface: BodySurface, object_centroid) -> tuple[np.ndarray, np.ndarray]:
    """(back-to-front head vector, back-of-head-to-object vector), unnormalized."""
    back = surface.vertices[surface.model.head_back]
    front = surface.vertices[surface.model.head_front]
    centroid = np.asarray(object_centroid, dtype=np.float64)
    return front - back, centroid - back


def lowest_vertex_height(surface: BodySurface) -> float:
    return float(surface.vertices[surface.model.lowest_candidates, 2].min())


def save_model_manifest(path_obj, path_json, model: BodyModel) -> None:
    """Template OBJ plus a JSON manifest of tree, skinning and landmarks."""
    save_obj(model.template_mesh(), path_obj)
    manifest = {
        "joint_names": model.joint_names,
        "parents": model.parents.tolist(),
        "rest_positions": model.rest_pos.tolist(),
        "skin_joint": model.skin_joint.tolist(),
        "hand_subset": model.hand_subset.tolist(),
        "wrist_ring": model.wrist_ring.tolist(),
        "head_back": model.head_back,
        "head_front": model.head_front,
        "lowest_candidates": "all",
    }
    with open(path_json, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
