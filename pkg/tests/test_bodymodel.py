import numpy as np
import pytest

from graspsynth.bodymodel import (
    BodyParams,
    HandParams,
    body_forward,
    build_models,
    hand_forward,
    head_vectors,
    lowest_vertex_height,
    rodrigues,
    save_model_manifest,
    yaw_pitch_roll_matrix,
)


@pytest.fixture(scope="module")
def models():
    return build_models()


def _random_body_params(rng, scale=0.4):
    return BodyParams(
        theta_b=rng.normal(scale=scale, size=(21, 3)),
        theta_h=rng.normal(scale=scale, size=(15, 3)),
        t_b=rng.normal(scale=0.5, size=3),
        rot_b=rng.uniform(-3.0, 3.0, size=3),
    )


def test_zero_pose_is_template(models):
    body, _ = models
    s = body_forward(BodyParams.zero())
    np.testing.assert_allclose(s.vertices, body.template, atol=1e-12)
    np.testing.assert_allclose(s.joint_positions[0], 0.0, atol=1e-12)


def test_pure_translation_shifts_all(models):
    body, _ = models
    p = BodyParams.zero()
    p.t_b = np.array([1.0, 0.0, 0.0])
    s = body_forward(p)
    np.testing.assert_allclose(s.vertices, body.template + [1.0, 0, 0], atol=1e-12)


def test_yaw_pi_rotates_about_vertical(models):
    body, _ = models
    p = BodyParams.zero()
    p.rot_b = np.array([np.pi, 0.0, 0.0])
    s = body_forward(p)
    R = np.array([[-1, 0, 0], [0, -1, 0], [0, 0, 1.0]])
    np.testing.assert_allclose(s.vertices, body.template @ R.T, atol=1e-9)


def test_fk_equivariant_under_global_rotation():
    rng = np.random.default_rng(0)
    p = _random_body_params(rng)
    zero_rot = BodyParams(p.theta_b, p.theta_h, np.zeros(3), np.zeros(3))
    base = body_forward(zero_rot)
    R = yaw_pitch_roll_matrix(p.rot_b)
    rotated = BodyParams(p.theta_b, p.theta_h, p.t_b, p.rot_b)
    s = body_forward(rotated)
    np.testing.assert_allclose(s.vertices, base.vertices @ R.T + p.t_b, atol=1e-9)


def test_topology_invariant_under_pose(models):
    body, _ = models
    rng = np.random.default_rng(1)
    s = body_forward(_random_body_params(rng))
    assert s.vertices.shape == body.template.shape
    assert s.faces is body.faces


def _chain_oracle(model, theta_all, root_R, root_t):
    """Vertices via per-joint homogeneous matrix chains (independent path)."""
    J = model.n_joints
    mats = [None] * J
    T0 = np.eye(4)
    T0[:3, :3] = root_R
    T0[:3, 3] = root_t + root_R @ model.rest_pos[0]
    mats[0] = T0
    for j in range(1, J):
        p = model.parents[j]
        L = np.eye(4)
        L[:3, :3] = rodrigues(theta_all[j - 1])
        off = model.rest_pos[j] - model.rest_pos[p]
        T = mats[p].copy()
        T[:3, 3] = T[:3, :3] @ off + T[:3, 3]
        mats[j] = T @ L
    out = np.empty_like(model.template)
    for i, v in enumerate(model.template):
        j = model.skin_joint[i]
        local = np.append(v - model.rest_pos[j], 1.0)
        out[i] = (mats[j] @ local)[:3]
    return out


def test_body_fk_matches_matrix_chain_oracle(models):
    body, _ = models
    rng = np.random.default_rng(2)
    for _ in range(5):
        p = _random_body_params(rng)
        s = body_forward(p)
        theta = np.concatenate([p.theta_b, p.theta_h])
        oracle = _chain_oracle(body, theta, yaw_pitch_roll_matrix(p.rot_b), p.t_b)
        assert np.abs(s.vertices - oracle).max() < 1e-9


def test_hand_zero_pose_is_template(models):
    _, hand = models
    v = hand_forward(HandParams.zero())
    np.testing.assert_allclose(v, hand.template, atol=1e-12)


def test_hand_wrist_rotation_is_rigid(models):
    _, hand = models
    rng = np.random.default_rng(3)
    rot = rng.normal(size=3)
    rot *= 1.2 / np.linalg.norm(rot)
    v = hand_forward(HandParams(np.zeros((15, 3)), np.zeros(3), rot))
    R = rodrigues(rot)
    np.testing.assert_allclose(v, hand.template @ R.T, atol=1e-9)


def test_hand_fk_matches_chain_oracle(models):
    _, hand = models
    rng = np.random.default_rng(4)
    for _ in range(5):
        theta = rng.normal(scale=0.5, size=(15, 3))
        t_h = rng.normal(size=3)
        rot = rng.normal(scale=0.8, size=3)
        v = hand_forward(HandParams(theta, t_h, rot))
        oracle = _chain_oracle(hand, theta, rodrigues(rot), t_h)
        assert np.abs(v - oracle).max() < 1e-9


def test_hand_matches_body_hand_subset(models):
    """Matched wrist placement and finger pose align the two models exactly."""
    body, _ = models
    rng = np.random.default_rng(5)
    p = _random_body_params(rng)
    s = body_forward(p)
    wrist_j = body.joint_names.index("right_wrist")
    Rw = s.joint_rotations[wrist_j]
    tw = s.joint_positions[wrist_j]
    angle = np.arccos(np.clip((np.trace(Rw) - 1) / 2, -1, 1))
    if angle < 1e-12:
        rot_h = np.zeros(3)
    else:
        axis = np.array([
            Rw[2, 1] - Rw[1, 2], Rw[0, 2] - Rw[2, 0], Rw[1, 0] - Rw[0, 1],
        ]) / (2 * np.sin(angle))
        rot_h = axis * angle
    hand_v = hand_forward(HandParams(p.theta_h, tw, rot_h))
    assert np.abs(hand_v - s.hand_vertices()).max() < 1e-6


def test_head_vectors_alignment_cases(models):
    body, _ = models
    s = body_forward(BodyParams.zero())
    front = s.vertices[body.head_front]
    back = s.vertices[body.head_back]
    v_bf, v_bo = head_vectors(s, front)
    assert np.linalg.norm(np.cross(v_bf, v_bo)) < 1e-12  # parallel

    behind = back - (front - back)
    _, v_bo = head_vectors(s, behind)
    cos = v_bf @ v_bo / (np.linalg.norm(v_bf) * np.linalg.norm(v_bo))
    assert cos == pytest.approx(-1.0)

    fwd = front - back
    side = np.cross(fwd, [0.0, 0.0, 1.0])
    _, v_bo = head_vectors(s, back + side)
    assert abs(v_bf @ v_bo) < 1e-12  # 90 degrees by dot product


def test_lowest_vertex_height(models):
    body, _ = models
    p = BodyParams.zero()
    p.t_b = np.array([0.0, 0.0, 1.0])
    s = body_forward(p)
    assert lowest_vertex_height(s) == pytest.approx(body.template[:, 2].min() + 1.0)

    rng = np.random.default_rng(6)
    s = body_forward(_random_body_params(rng))
    assert lowest_vertex_height(s) == s.vertices[:, 2].min()


def test_axis_angle_magnitude_validation():
    bad = np.zeros((21, 3))
    bad[0, 0] = 4.0
    with pytest.raises(ValueError):
        BodyParams(bad, np.zeros((15, 3)), np.zeros(3), np.zeros(3))


def test_manifest_roundtrip(tmp_path, models):
    body, _ = models
    save_model_manifest(tmp_path / "body.obj", tmp_path / "body.json", body)
    import json

    with open(tmp_path / "body.json") as fh:
        manifest = json.load(fh)
    assert manifest["joint_names"][0] == "pelvis"
    assert len(manifest["skin_joint"]) == body.n_vertices
    assert manifest["head_back"] != manifest["head_front"]
