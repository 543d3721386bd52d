import numpy as np
import pytest

from graspsynth import priors
from graspsynth.bodymodel import BodyParams, body_forward
from graspsynth.meshgeom import Mesh, bps_encode, rotation_z
from graspsynth.meshgeom.primitives import box, icosphere


@pytest.fixture(scope="session")
def pose_prior():
    return priors.default_pose_prior()


@pytest.fixture(scope="session")
def grasp_prior():
    return priors.default_grasp_prior()


@pytest.fixture(scope="session")
def pose_ground():
    return priors.default_pose_ground()


def test_decode_zero_latent_is_standing(pose_prior):
    th = pose_prior.decode(np.zeros(priors.POSE_LATENT_DIM))
    assert np.abs(th - priors.standing_pose()).max() < 0.15
    # and the posed body is upright and plausible
    s = body_forward(BodyParams(th, np.zeros((15, 3)), np.zeros(3), np.zeros(3)))
    height = s.vertices[:, 2].max() - s.vertices[:, 2].min()
    assert height > 1.5
    head = s.vertices[s.model.head_front, 2]
    assert head > s.joint_positions[0, 2]  # head above pelvis


def test_decode_pose_continuity(pose_prior):
    rng = np.random.default_rng(0)
    for _ in range(5):
        v1 = rng.normal(size=32)
        d = rng.normal(size=32)
        v2 = v1 + 1e-6 * d / np.linalg.norm(d)
        assert np.abs(pose_prior.decode(v1) - pose_prior.decode(v2)).max() < 1e-4


def test_decode_pose_respects_limits(pose_prior):
    rng = np.random.default_rng(1)
    lim = priors.joint_limit_vector().reshape(21, 3)
    for _ in range(100):
        th = pose_prior.decode(rng.normal(size=32) * 3.0)
        assert (np.abs(th) <= lim + 1e-12).all()


def test_decode_grasp_sphere_proximity(grasp_prior):
    ball = icosphere(0.08, 2)
    enc = bps_encode(ball, grasp_prior.basis, 0.0)
    hp = priors.decode_grasp(grasp_prior, np.zeros(16), 0.0, enc)
    assert np.linalg.norm(hp.t_h) < 2 * 0.08


def test_decode_grasp_alpha_periodic(grasp_prior):
    obj = box([0.1, 0.06, 0.12])
    a = priors.decode_grasp(grasp_prior, np.zeros(16), 0.7,
                            bps_encode(obj, grasp_prior.basis, 0.7))
    b = priors.decode_grasp(grasp_prior, np.zeros(16), 0.7 + 2 * np.pi,
                            bps_encode(obj, grasp_prior.basis, 0.7 + 2 * np.pi))
    assert np.abs(a.theta_h - b.theta_h).max() < 1e-6
    assert np.abs(a.t_h - b.t_h).max() < 1e-6
    assert np.abs(a.rot_h - b.rot_h).max() < 1e-6


def test_decode_grasp_equivariant_to_object_rotation(grasp_prior):
    from graspsynth.bodymodel import hand_forward, HandParams, rodrigues

    obj = box([0.14, 0.07, 0.1])
    gamma = 0.85
    alpha = 0.4
    rot = Mesh((obj.vertices - obj.vertices.mean(0)) @ rotation_z(gamma).T,
               obj.faces, watertight=True)
    a = priors.decode_grasp(grasp_prior, np.zeros(16), alpha,
                            bps_encode(obj, grasp_prior.basis, alpha))
    b = priors.decode_grasp(grasp_prior, np.zeros(16), alpha - gamma,
                            bps_encode(rot, grasp_prior.basis, alpha - gamma))
    Rg = rotation_z(gamma)
    np.testing.assert_allclose(b.t_h, Rg @ a.t_h, atol=1e-6)
    # compare meshes: rotating the whole grasp must match the re-decoded one
    va = hand_forward(HandParams(a.theta_h, a.t_h, a.rot_h))
    vb = hand_forward(HandParams(b.theta_h, b.t_h, b.rot_h))
    np.testing.assert_allclose(vb, va @ Rg.T, atol=1e-6)


def test_decode_grasp_fingers_within_limits(grasp_prior):
    rng = np.random.default_rng(2)
    obj = icosphere(0.06, 1)
    enc = bps_encode(obj, grasp_prior.basis, 0.0)
    for _ in range(20):
        w = rng.normal(size=16)
        w /= np.linalg.norm(w)
        hp = priors.decode_grasp(grasp_prior, w, rng.uniform(-3, 3), enc)
        assert (np.abs(hp.theta_h) <= priors.FINGER_LIMIT).all()


def test_decoders_deterministic(pose_prior, grasp_prior):
    v = np.linspace(-1, 1, 32)
    a = pose_prior.decode(v)
    b = pose_prior.decode(v)
    np.testing.assert_array_equal(a, b)


def test_prior_weights_frozen(pose_prior, grasp_prior, pose_ground):
    for model in (pose_prior, grasp_prior, pose_ground):
        for arr in model.weight_arrays():
            with pytest.raises((ValueError, RuntimeError)):
                arr[tuple(0 for _ in arr.shape)] = 123.0


def test_pose_ground_constant_targets():
    rng = np.random.default_rng(3)
    thetas = rng.normal(scale=0.3, size=(6000, 63))
    with pytest.warns(RuntimeWarning):
        model = priors.train_pose_ground(
            (thetas, np.zeros(6000), np.zeros(6000)), seed=11)
    pred = model.predict(thetas[:200])
    assert np.mean(pred ** 2) < 1e-4


def test_pose_ground_recovers_linear_relation():
    rng = np.random.default_rng(4)
    thetas = rng.uniform(-1, 1, size=(8000, 63))
    pitch = 0.3 * thetas[:, 0]
    roll = np.zeros(8000)
    model = priors.train_pose_ground((thetas, pitch, roll), seed=12)
    probe = rng.uniform(-1, 1, size=(500, 63))
    pred = model.predict(probe)[:, 0]
    true = 0.3 * probe[:, 0]
    mask = np.abs(true) > 0.1
    rel = np.abs(pred[mask] - true[mask]) / np.abs(true[mask])
    assert np.median(rel) < 0.05
    assert rel.mean() < 0.05


def test_pose_ground_beats_mean_predictor(pose_ground):
    assert pose_ground.heldout_mse < 0.5 * pose_ground.baseline_mse


def test_pose_ground_needs_5000_pairs():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        priors.train_pose_ground(
            (rng.normal(size=(100, 63)), np.zeros(100), np.zeros(100)))


def test_pose_ground_symmetric_pose_has_zero_roll(pose_ground):
    pitch, roll = priors.predict_ground_orientation(
        pose_ground, priors.standing_pose().reshape(-1))
    assert abs(roll) < 0.05


def test_pose_ground_fits_training_labels(pose_ground):
    thetas, pitch, roll = priors._default_corpus(priors.DEFAULT_PRIOR_SEED)
    pred = pose_ground.predict(thetas[:100])
    err = np.abs(pred - np.column_stack([pitch[:100], roll[:100]]))
    assert np.quantile(err, 0.95) < 0.1


def test_pose_ground_repeated_query_bit_identical(pose_ground):
    th = priors.standing_pose().reshape(-1)
    a = priors.predict_ground_orientation(pose_ground, th)
    b = priors.predict_ground_orientation(pose_ground, th)
    assert a == b


def test_serialization_roundtrip(tmp_path, pose_prior, grasp_prior, pose_ground):
    rng = np.random.default_rng(6)
    v = rng.normal(size=32)
    for name, model in [("pp", pose_prior), ("gp", grasp_prior),
                        ("pg", pose_ground)]:
        path = tmp_path / f"{name}.bin"
        priors.save_model(path, model)
        back = priors.load_model(path)
        if name == "pp":
            np.testing.assert_array_equal(back.decode(v), model.decode(v))
        elif name == "gp":
            enc = np.abs(rng.normal(size=len(model.basis)))
            a = model.decode_raw(np.zeros(16), 0.3, enc)
            b = back.decode_raw(np.zeros(16), 0.3, enc)
            for x, y in zip(a, b):
                np.testing.assert_array_equal(x, y)
        else:
            x = rng.normal(size=(5, 63))
            np.testing.assert_array_equal(back.predict(x), model.predict(x))
        assert back.corpus_hash == model.corpus_hash
