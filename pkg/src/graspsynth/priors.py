"""Frozen generative stand-ins: pose prior, grasp prior, pose-ground model.

All three are small numpy MLPs trained at build time on procedurally
generated corpora (deterministic given a seed) and frozen afterwards.  The
pose prior decodes a 32-dim latent into the 21-joint body pose; the grasp
prior decodes a 16-dim latent, an approach angle and a BPS object encoding
into wrist placement plus finger pose; the pose-ground model regresses pelvis
pitch and roll from the body pose so a pose rests naturally on a flat floor.

Weights are serialized to a binary blob with a JSON header (dims, seed,
training corpus hash).
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bodymodel import rodrigues
from .meshgeom import (
    Mesh,
    bps_encode,
    rotation_z,
    sample_basis,
    DEFAULT_BASIS_COUNT,
    DEFAULT_BASIS_RADIUS,
    DEFAULT_BASIS_SEED,
)
from .meshgeom.primitives import box, cylinder, icosphere

__all__ = [
    "PosePriorModel", "GraspPriorModel", "PoseGroundModel",
    "POSE_LATENT_DIM", "GRASP_LATENT_DIM",
    "generate_pose_corpus", "generate_grasp_dataset",
    "train_pose_prior", "train_grasp_prior", "train_pose_ground",
    "default_pose_prior", "default_grasp_prior", "default_pose_ground",
    "decode_pose", "decode_grasp", "predict_ground_orientation",
    "save_model", "load_model", "joint_limit_vector", "FINGER_LIMIT",
    "HandPlacement",
]

POSE_LATENT_DIM = 32
GRASP_LATENT_DIM = 16
FINGER_LIMIT = 1.6  # radians per finger-joint component

DEFAULT_PRIOR_SEED = 7130

# per-joint axis-angle component limits, ordered as theta_b rows
_JOINT_LIMIT_TABLE = {
    "hip": 1.9, "knee": 2.4, "ankle": 1.0, "foot": 0.6,
    "spine": 0.8, "neck": 0.9, "head": 0.9, "collar": 0.6,
    "shoulder": 2.2, "elbow": 2.4, "wrist": 1.2,
}
_THETA_B_ORDER = [
    "hip", "hip", "spine", "knee", "knee", "spine", "ankle", "ankle",
    "spine", "foot", "foot", "neck", "collar", "collar", "head",
    "shoulder", "shoulder", "elbow", "elbow", "wrist", "wrist",
]


def joint_limit_vector() -> np.ndarray:
    """(63,) per-component squash limits for the body pose."""
    lims = np.array([_JOINT_LIMIT_TABLE[k] for k in _THETA_B_ORDER])
    return np.repeat(lims, 3)


# ---------------------------------------------------------------------------
# tiny numpy MLP with tanh hidden layers, trained full-batch with Adam
# ---------------------------------------------------------------------------

def _init_layers(sizes, rng):
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        layers.append([rng.normal(0.0, std, size=(fan_in, fan_out)),
                       np.zeros(fan_out)])
    return layers


def _mlp_forward(layers, x):
    """Returns activations per layer; tanh on all but the last layer."""
    acts = [x]
    h = x
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        h = z if i == len(layers) - 1 else np.tanh(z)
        acts.append(h)
    return acts


def mlp_apply(layers, x):
    return _mlp_forward(layers, x)[-1]


def _mlp_train(layers, x, y, iters=800, lr=1e-3, weight_decay=1e-4,
               batch_size=None, rng=None):
    """Minibatch Adam on mean squared error; deterministic given rng."""
    params = [p for layer in layers for p in layer]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    n = len(x)
    for t in range(1, iters + 1):
        if batch_size is not None and batch_size < n:
            sel = rng.integers(0, n, size=batch_size)
            xb, yb = x[sel], y[sel]
        else:
            xb, yb = x, y
        acts = _mlp_forward(layers, xb)
        delta = 2.0 * (acts[-1] - yb) / (len(xb) * y.shape[1])
        grads = []
        for i in range(len(layers) - 1, -1, -1):
            W, b = layers[i]
            gW = acts[i].T @ delta + weight_decay * W
            gb = delta.sum(axis=0)
            grads = [gW, gb] + grads
            if i > 0:
                delta = (delta @ W.T) * (1.0 - acts[i] ** 2)
        for k, g in enumerate(grads):
            m[k] = b1 * m[k] + (1 - b1) * g
            v[k] = b2 * v[k] + (1 - b2) * g * g
            mh = m[k] / (1 - b1 ** t)
            vh = v[k] / (1 - b2 ** t)
            params[k] -= lr * mh / (np.sqrt(vh) + eps)
    return layers


def _freeze(arrays):
    for a in arrays:
        a.setflags(write=False)


def _hash_arrays(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# pose corpus: parametric standing / crouching / bending / reaching poses
# with the pelvis pitch and roll that ground them on a flat floor
# ---------------------------------------------------------------------------

_J = {name: i for i, name in enumerate([
    "left_hip", "right_hip", "spine1", "left_knee", "right_knee", "spine2",
    "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
])}


def standing_pose() -> np.ndarray:
    """Arms lowered, legs straight: the decoder's bias pose target."""
    th = np.zeros((21, 3))
    th[_J["left_shoulder"], 0] = 1.15
    th[_J["right_shoulder"], 0] = -1.15
    th[_J["left_elbow"], 0] = 0.12
    th[_J["right_elbow"], 0] = -0.12
    return th


def _sample_pose(rng):
    """One corpus pose plus its grounded pelvis (pitch, roll)."""
    th = standing_pose().copy()

    crouch = rng.uniform(0.0, 1.0) * (rng.random() < 0.55)
    bend = rng.uniform(0.0, 0.9) * (rng.random() < 0.4)
    lean = rng.uniform(-0.25, 0.25) * (rng.random() < 0.5)

    # crouch: hips flex forward, knees fold back, ankles keep feet flat;
    # the pelvis pitches forward with depth
    hip_flex = 1.05 * crouch
    knee_flex = 1.95 * crouch
    pitch = 0.42 * crouch
    th[_J["left_hip"], 1] += -hip_flex
    th[_J["right_hip"], 1] += -hip_flex
    th[_J["left_knee"], 1] += knee_flex
    th[_J["right_knee"], 1] += knee_flex
    th[_J["left_ankle"], 1] += hip_flex - knee_flex
    th[_J["right_ankle"], 1] += hip_flex - knee_flex

    # bend: whole pelvis pitches forward, hips counter-rotate to keep the
    # legs vertical, spine curls a little extra
    pitch += bend
    th[_J["left_hip"], 1] += bend
    th[_J["right_hip"], 1] += bend
    for s in ("spine1", "spine2", "spine3"):
        th[_J[s], 1] += 0.25 * bend

    # side lean: pelvis rolls, hips counter-roll to keep feet planted
    roll = lean
    th[_J["left_hip"], 0] += -lean
    th[_J["right_hip"], 0] += -lean

    # reaching arm (right): raise/lower plus azimuth swing and elbow bend
    raise_r = rng.uniform(-1.3, 1.5)
    swing_r = rng.uniform(-0.9, 0.9)
    th[_J["right_shoulder"], 0] = -1.15 + raise_r
    th[_J["right_shoulder"], 2] = swing_r
    th[_J["right_elbow"], 0] = -rng.uniform(0.0, 1.8)
    th[_J["right_wrist"], 0] = rng.uniform(-0.4, 0.4)

    # relaxed left arm and head variation
    th[_J["left_shoulder"], 0] += rng.uniform(-0.3, 0.3)
    th[_J["left_elbow"], 0] += rng.uniform(0.0, 0.5)
    th[_J["head"], 1] += rng.uniform(-0.3, 0.3)
    th[_J["neck"], 2] += rng.uniform(-0.3, 0.3)

    # small noise everywhere; pitch/roll-relevant joints get less so the
    # grounding labels stay learnable
    noise = rng.normal(0.0, 0.15, size=(21, 3))
    for name in ("left_hip", "right_hip", "left_knee", "right_knee",
                 "left_ankle", "right_ankle", "spine1", "spine2", "spine3"):
        noise[_J[name]] *= 0.12
    th += noise

    lim = joint_limit_vector().reshape(21, 3)
    th = np.clip(th, -lim + 1e-3, lim - 1e-3)
    return th.reshape(-1), pitch, roll


def generate_pose_corpus(n: int, seed: int):
    """(thetas (n, 63), pitch (n,), roll (n,)) — deterministic given seed."""
    rng = np.random.default_rng(seed)
    thetas = np.empty((n, 63))
    pitch = np.empty(n)
    roll = np.empty(n)
    for i in range(n):
        thetas[i], pitch[i], roll[i] = _sample_pose(rng)
    return thetas, pitch, roll


# ---------------------------------------------------------------------------
# pose prior: autoencoder over the corpus; the decoder is kept, re-biased so
# that decoding the zero latent yields the standing pose
# ---------------------------------------------------------------------------

@dataclass
class PosePriorModel:
    layers: list  # decoder: latent -> 63 raw outputs
    limits: np.ndarray  # (63,) squash limits
    latent_dim: int
    seed: int
    corpus_hash: str

    def weight_arrays(self):
        return [p for layer in self.layers for p in layer]

    def decode(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        raw = mlp_apply(self.layers, v.reshape(-1, self.latent_dim))
        th = self.limits * np.tanh(raw / self.limits)
        return th.reshape(v.shape[:-1] + (21, 3)) if v.ndim > 1 else th.reshape(21, 3)


def train_pose_prior(corpus_thetas: np.ndarray, seed: int = DEFAULT_PRIOR_SEED,
                     latent_dim: int = POSE_LATENT_DIM) -> PosePriorModel:
    rng = np.random.default_rng(seed)
    limits = joint_limit_vector()
    # train in pre-squash space so the decoder output maps through the squash
    y = np.arctanh(np.clip(corpus_thetas / limits, -0.999, 0.999)) * limits
    enc = _init_layers([63, 64, latent_dim], rng)
    dec = _init_layers([latent_dim, 64, 64, 63], rng)

    params = enc + dec
    flat = [p for layer in params for p in layer]
    m = [np.zeros_like(p) for p in flat]
    vv = [np.zeros_like(p) for p in flat]
    b1, b2, eps, lr, wd = 0.9, 0.999, 1e-8, 1.5e-3, 1e-5
    n = len(y)
    batch = min(768, n)
    for t in range(1, 1501):
        sel = rng.integers(0, n, size=batch) if batch < n else slice(None)
        yb = y[sel]
        a_enc = _mlp_forward(enc, yb)
        lat = a_enc[-1]
        a_dec = _mlp_forward(dec, lat)
        delta = 2.0 * (a_dec[-1] - yb) / (len(yb) * 63)
        grads_dec, grads_enc = [], []
        d = delta
        for i in range(len(dec) - 1, -1, -1):
            W, _ = dec[i]
            grads_dec = [a_dec[i].T @ d + wd * W, d.sum(axis=0)] + grads_dec
            if i > 0:
                d = (d @ W.T) * (1.0 - a_dec[i] ** 2)
            else:
                d = d @ W.T  # into the latent (encoder output, linear)
        for i in range(len(enc) - 1, -1, -1):
            W, _ = enc[i]
            if i == len(enc) - 1:
                pass  # latent layer is linear
            grads_enc = [a_enc[i].T @ d + wd * W, d.sum(axis=0)] + grads_enc
            if i > 0:
                d = (d @ W.T) * (1.0 - a_enc[i] ** 2)
        grads = grads_enc + grads_dec
        for k, g in enumerate(grads):
            m[k] = b1 * m[k] + (1 - b1) * g
            vv[k] = b2 * vv[k] + (1 - b2) * g * g
            flat[k] -= lr * (m[k] / (1 - b1 ** t)) / (np.sqrt(vv[k] / (1 - b2 ** t)) + eps)

    # re-bias: fold the standing pose's latent into the first decoder layer so
    # that decode(0) is the standing pose
    stand_y = np.arctanh(np.clip(standing_pose().reshape(1, -1) / limits,
                                 -0.999, 0.999)) * limits
    mu = mlp_apply(enc, stand_y)[0]
    dec[0][1] = dec[0][1] + mu @ dec[0][0]

    _freeze([p for layer in dec for p in layer])
    limits = limits.copy()
    _freeze([limits])
    return PosePriorModel(layers=dec, limits=limits, latent_dim=latent_dim,
                          seed=seed, corpus_hash=_hash_arrays(corpus_thetas))


def decode_pose(model: PosePriorModel, v: np.ndarray) -> np.ndarray:
    return model.decode(v)


# ---------------------------------------------------------------------------
# grasp prior: regression from (BPS encoding, w, approach angle) to a hand
# placement in the canonical frame, rotated back to the object frame
# ---------------------------------------------------------------------------

@dataclass
class HandPlacement:
    """decode_grasp output: finger pose + wrist placement.

    The wrist pose is expressed in the axes of the world with the object
    centered at the origin (the caller adds the object centroid back).
    """

    theta_h: np.ndarray  # (15, 3)
    t_h: np.ndarray  # (3,)
    rot_h: np.ndarray  # (3,) axis-angle

    def to_hand_params(self, centroid=None):
        from .bodymodel import HandParams

        t = self.t_h if centroid is None else self.t_h + np.asarray(centroid)
        return HandParams(self.theta_h.copy(), t, self.rot_h.copy())


@dataclass
class GraspPriorModel:
    projection: np.ndarray  # (n_basis, feat) frozen random features
    layers: list  # MLP: [feat + latent + 2] -> 51
    basis: np.ndarray  # (n_basis, 3)
    latent_dim: int
    seed: int
    corpus_hash: str
    finger_limit: float = FINGER_LIMIT

    @property
    def feature_dim(self) -> int:
        return self.projection.shape[1]

    def weight_arrays(self):
        return [self.projection] + [p for layer in self.layers for p in layer]

    def decode_raw(self, w, alpha, distances):
        """51 canonical outputs: 45 squashed finger angles, t_c (3), r_c (3).

        The canonical grasp depends only on the canonical-frame encoding (and
        w); alpha acts through the encoding and the rotate-back, which keeps
        the world-frame output exactly equivariant to object rotation.
        """
        feats = np.asarray(distances) @ self.projection
        x = np.concatenate([
            np.atleast_1d(feats).reshape(-1),
            np.asarray(w, dtype=np.float64).reshape(-1),
        ])
        out = mlp_apply(self.layers, x[None, :])[0]
        fingers = self.finger_limit * np.tanh(out[:45] / self.finger_limit)
        return fingers.reshape(15, 3), out[45:48], out[48:51]


def decode_grasp(model: GraspPriorModel, w, alpha: float, enc) -> HandPlacement:
    """Decode a grasp; wrist placement rotated back into the object frame."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != model.latent_dim:
        raise ValueError(f"w must have dim {model.latent_dim}")
    distances = enc.distances if hasattr(enc, "distances") else np.asarray(enc)
    fingers, t_c, r_c = model.decode_raw(w, float(alpha), distances)
    R_back = rotation_z(-float(alpha))
    t_world = R_back @ t_c
    R_world = R_back @ rodrigues(r_c)
    rot_world = _rotation_to_axis_angle(R_world)
    return HandPlacement(theta_h=fingers, t_h=t_world, rot_h=rot_world)


def _rotation_to_axis_angle(R: np.ndarray) -> np.ndarray:
    cos = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos)
    if angle < 1e-12:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # near-pi: extract axis from R + I
        M = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diagonal(M), 0.0))
        axis = axis / max(np.linalg.norm(axis), 1e-12)
        s = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        axis = np.where(s < 0, -np.abs(axis), np.abs(axis))
        return axis * angle
    axis = np.array([
        R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1],
    ]) / (2.0 * np.sin(angle))
    return axis * angle


def _random_convex_object(rng) -> Mesh:
    kind = rng.integers(3)
    if kind == 0:
        return icosphere(rng.uniform(0.035, 0.1), 1)
    if kind == 1:
        return box(rng.uniform(0.05, 0.18, size=3))
    return cylinder(rng.uniform(0.025, 0.06), rng.uniform(0.06, 0.2), 10)


# canonical grasp frame: approach from +X, palm toward -X, fingers tangent
_R_CANONICAL = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
_PALM_CENTER_LOCAL = np.array([0.0, -0.046, -0.034])
_GRASP_PENETRATION = 0.004  # slight intersection keeps contact bands alive


def _canonical_grasp_target(obj: Mesh, rng):
    """Wrist pose + curled fingers for a centered convex object."""
    centered = obj.vertices - obj.vertices.mean(axis=0)
    reach_x = centered[:, 0].max()
    half_y = centered[:, 1].max()
    contact = np.array([reach_x - _GRASP_PENETRATION, 0.0, 0.0])
    t_c = contact - _R_CANONICAL @ _PALM_CENTER_LOCAL
    curl = float(np.clip(1.25 - 5.5 * half_y, 0.25, 1.25))
    fingers = np.zeros((15, 3))
    for f in range(4):  # index..pinky chains
        for s in range(3):
            fingers[3 * f + s, 0] = curl * (0.9 if s == 0 else 0.65)
    for s in range(3):  # thumb opposes
        fingers[12 + s, 0] = 0.5 * curl
    r_c = _rotation_to_axis_angle(_R_CANONICAL)
    return fingers, t_c, r_c


def generate_grasp_dataset(n: int, seed: int, basis: np.ndarray):
    """Encodings of randomly rotated convex objects -> canonical grasp targets.

    The target is computed from the rotated (canonical-frame) geometry, so the
    decoder sees encodings of objects at every orientation.
    """
    rng = np.random.default_rng(seed)
    n_basis = len(basis)
    enc = np.empty((n, n_basis))
    ws = np.empty((n, GRASP_LATENT_DIM))
    alphas = np.empty(n)
    targets = np.empty((n, 51))
    w_mix = rng.normal(0.0, 0.02, size=(GRASP_LATENT_DIM, 51))
    for i in range(n):
        obj = _random_convex_object(rng)
        alpha = rng.uniform(-np.pi, np.pi)
        alphas[i] = alpha
        enc[i] = bps_encode(obj, basis, alpha).distances
        w = rng.normal(size=GRASP_LATENT_DIM)
        w /= np.linalg.norm(w)
        if rng.random() < 0.3:
            w[:] = 0.0
        ws[i] = w
        canonical = Mesh(
            (obj.vertices - obj.vertices.mean(axis=0)) @ rotation_z(alpha).T,
            obj.faces, watertight=obj.watertight)
        fingers, t_c, r_c = _canonical_grasp_target(canonical, rng)
        targets[i] = np.concatenate([fingers.reshape(-1), t_c, r_c]) + w @ w_mix
    return enc, ws, alphas, targets


def train_grasp_prior(n: int = 2500, seed: int = DEFAULT_PRIOR_SEED,
                      basis: np.ndarray | None = None,
                      feature_dim: int = 16) -> GraspPriorModel:
    if basis is None:
        basis = sample_basis(DEFAULT_BASIS_COUNT, DEFAULT_BASIS_SEED,
                             DEFAULT_BASIS_RADIUS)
    rng = np.random.default_rng(seed + 1)
    enc, ws, alphas, targets = generate_grasp_dataset(n, seed, basis)
    projection = rng.normal(0.0, 1.0 / np.sqrt(len(basis)),
                            size=(len(basis), feature_dim)) * 8.0
    feats = enc @ projection
    lim = FINGER_LIMIT
    y = targets.copy()
    y[:, :45] = np.arctanh(np.clip(targets[:, :45] / lim, -0.999, 0.999)) * lim
    x = np.column_stack([feats, ws])
    layers = _init_layers([x.shape[1], 64, 51], rng)
    _mlp_train(layers, x, y, iters=900, lr=2e-3, batch_size=512, rng=rng)
    _freeze([projection] + [p for layer in layers for p in layer])
    basis = basis.copy()
    _freeze([basis])
    return GraspPriorModel(projection=projection, layers=layers, basis=basis,
                           latent_dim=GRASP_LATENT_DIM, seed=seed,
                           corpus_hash=_hash_arrays(enc, ws, targets))


# ---------------------------------------------------------------------------
# pose-ground model: theta_b -> (pitch, roll), 2-layer MLP, MSE regression
# ---------------------------------------------------------------------------

@dataclass
class PoseGroundModel:
    layers: list  # 63 -> hidden -> 2
    heldout_mse: float
    baseline_mse: float
    seed: int
    corpus_hash: str

    def weight_arrays(self):
        return [p for layer in self.layers for p in layer]

    def predict(self, theta_b: np.ndarray) -> np.ndarray:
        x = np.asarray(theta_b, dtype=np.float64).reshape(-1, 63)
        raw = mlp_apply(self.layers, x)
        out = np.pi * np.tanh(raw / np.pi)
        return out[0] if np.asarray(theta_b).ndim <= 2 and x.shape[0] == 1 else out


def train_pose_ground(dataset, seed: int = DEFAULT_PRIOR_SEED,
                      hidden: int = 64) -> PoseGroundModel:
    """MSE regression of (pitch, roll) from theta_b; frozen afterwards."""
    thetas, pitch, roll = dataset
    thetas = np.asarray(thetas, dtype=np.float64).reshape(len(thetas), -1)
    targets = np.column_stack([pitch, roll]).astype(np.float64)
    if len(thetas) < 5000:
        raise ValueError("pose-ground training needs at least 5000 pairs")
    if np.ptp(targets, axis=0).max() < 1e-12:
        warnings.warn("pose-ground dataset has constant targets", RuntimeWarning)

    rng = np.random.default_rng(seed + 2)
    order = rng.permutation(len(thetas))
    n_hold = max(1, len(thetas) // 10)
    hold, train = order[:n_hold], order[n_hold:]
    y = np.arctanh(np.clip(targets / np.pi, -0.999, 0.999)) * np.pi

    layers = _init_layers([63, hidden, 2], rng)
    _mlp_train(layers, thetas[train], y[train], iters=2500, lr=2e-3,
               batch_size=1024, rng=rng)

    pred = np.pi * np.tanh(mlp_apply(layers, thetas[hold]) / np.pi)
    heldout_mse = float(np.mean((pred - targets[hold]) ** 2))
    mean_pred = targets[train].mean(axis=0)
    baseline_mse = float(np.mean((targets[hold] - mean_pred) ** 2))

    _freeze([p for layer in layers for p in layer])
    return PoseGroundModel(layers=layers, heldout_mse=heldout_mse,
                           baseline_mse=baseline_mse, seed=seed,
                           corpus_hash=_hash_arrays(thetas, targets))


def predict_ground_orientation(model: PoseGroundModel, theta_b) -> tuple[float, float]:
    out = model.predict(np.asarray(theta_b).reshape(1, -1))
    return float(out[0]), float(out[1])


# ---------------------------------------------------------------------------
# defaults (trained once per process per seed) and serialization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def _default_corpus(seed: int):
    return generate_pose_corpus(8000, seed)


@lru_cache(maxsize=4)
def default_pose_prior(seed: int = DEFAULT_PRIOR_SEED) -> PosePriorModel:
    thetas, _, _ = _default_corpus(seed)
    return train_pose_prior(thetas, seed=seed)


@lru_cache(maxsize=4)
def default_grasp_prior(seed: int = DEFAULT_PRIOR_SEED) -> GraspPriorModel:
    return train_grasp_prior(seed=seed)


@lru_cache(maxsize=4)
def default_pose_ground(seed: int = DEFAULT_PRIOR_SEED) -> PoseGroundModel:
    return train_pose_ground(_default_corpus(seed), seed=seed)


_MAGIC = b"GSPM"
_KINDS = {"pose_prior": PosePriorModel, "grasp_prior": GraspPriorModel,
          "pose_ground": PoseGroundModel}


def save_model(path, model) -> None:
    """Versioned binary blob: magic, JSON header, concatenated float64 data."""
    if isinstance(model, PosePriorModel):
        kind = "pose_prior"
        arrays = {"limits": model.limits}
        meta = {"latent_dim": model.latent_dim}
    elif isinstance(model, GraspPriorModel):
        kind = "grasp_prior"
        arrays = {"projection": model.projection, "basis": model.basis}
        meta = {"latent_dim": model.latent_dim, "finger_limit": model.finger_limit}
    elif isinstance(model, PoseGroundModel):
        kind = "pose_ground"
        arrays = {}
        meta = {"heldout_mse": model.heldout_mse,
                "baseline_mse": model.baseline_mse}
    else:
        raise TypeError(f"cannot serialize {type(model)!r}")
    for i, (W, b) in enumerate(model.layers):
        arrays[f"W{i}"] = W
        arrays[f"b{i}"] = b
    header = {
        "kind": kind, "version": 1, "seed": model.seed,
        "corpus_hash": model.corpus_hash, "meta": meta,
        "n_layers": len(model.layers),
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype=np.float64).tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a graspsynth model blob")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            n = int(np.prod(shape))
            arrays[spec["name"]] = np.frombuffer(
                fh.read(8 * n), dtype=np.float64).reshape(shape).copy()
    layers = [[arrays[f"W{i}"], arrays[f"b{i}"]]
              for i in range(header["n_layers"])]
    _freeze([p for layer in layers for p in layer])
    kind, meta = header["kind"], header["meta"]
    if kind == "pose_prior":
        limits = arrays["limits"]
        _freeze([limits])
        return PosePriorModel(layers=layers, limits=limits,
                              latent_dim=meta["latent_dim"],
                              seed=header["seed"],
                              corpus_hash=header["corpus_hash"])
    if kind == "grasp_prior":
        projection, basis = arrays["projection"], arrays["basis"]
        _freeze([projection, basis])
        return GraspPriorModel(projection=projection, layers=layers,
                               basis=basis, latent_dim=meta["latent_dim"],
                               seed=header["seed"],
                               corpus_hash=header["corpus_hash"],
                               finger_limit=meta["finger_limit"])
    if kind == "pose_ground":
        return PoseGroundModel(layers=layers,
                               heldout_mse=meta["heldout_mse"],
                               baseline_mse=meta["baseline_mse"],
                               seed=header["seed"],
                               corpus_hash=header["corpus_hash"])
    raise ValueError(f"unknown model kind {kind!r}")
