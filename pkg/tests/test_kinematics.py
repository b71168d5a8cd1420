import json

import numpy as np
import pytest
import torch
from scipy.spatial.transform import Rotation

from hmdmotion.errors import DegenerateInput, ShapeMismatch
from hmdmotion import kinematics as K

from conftest import random_rotation, random_transform

F64 = torch.float64


def T(x):
    return torch.as_tensor(x, dtype=F64)


# ---------------------------------------------------------------------------
# axis-angle <-> matrix
# ---------------------------------------------------------------------------


def test_aa_zero_is_identity():
    assert torch.allclose(K.aa_to_matrix(T([0.0, 0.0, 0.0])), torch.eye(3, dtype=F64))


def test_aa_half_turn_about_z():
    m = K.aa_to_matrix(T([0.0, 0.0, np.pi]))
    assert torch.allclose(m, torch.diag(T([-1.0, -1.0, 1.0])), atol=1e-12)


def test_aa_matches_quaternion_oracle(rng):
    # oracle: scipy converts axis-angle through quaternions, entirely
    # independent of the Rodrigues path under test
    for _ in range(200):
        aa = rng.normal(size=3) * rng.uniform(0.0, np.pi)
        ours = K.aa_to_matrix(T(aa))
        oracle = Rotation.from_rotvec(aa).as_matrix()
        assert torch.allclose(ours, T(oracle), atol=1e-9)


def test_aa_round_trip(rng):
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        aa = axis * rng.uniform(1e-8, np.pi - 1e-6)
        back = K.matrix_to_aa(K.aa_to_matrix(T(aa)))
        assert torch.allclose(back, T(aa), atol=1e-7)


def test_matrix_to_aa_half_turns():
    # angle-pi rotations keep a well-defined magnitude even though the axis
    # sign is arbitrary
    for axis in np.eye(3):
        m = T(Rotation.from_rotvec(axis * np.pi).as_matrix())
        aa = K.matrix_to_aa(m)
        assert torch.linalg.norm(aa).item() == pytest.approx(np.pi, abs=1e-9)
        assert torch.allclose(K.aa_to_matrix(aa), m, atol=1e-9)


def test_canonicalize_aa(rng):
    for _ in range(100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, 4 * np.pi)
        canon = K.canonicalize_aa(T(axis * angle))
        mag = torch.linalg.norm(canon).item()
        assert 0.0 <= mag <= np.pi + 1e-12
        same = K.aa_to_matrix(canon)
        ref = K.aa_to_matrix(T(axis * angle))
        assert torch.allclose(same, ref, atol=1e-9)


# ---------------------------------------------------------------------------
# 6D representation
# ---------------------------------------------------------------------------


def test_rot6d_identity_columns():
    assert torch.allclose(K.rot6d_decode(T([1, 0, 0, 0, 1, 0])), torch.eye(3, dtype=F64))


def test_rot6d_scale_invariance():
    assert torch.allclose(K.rot6d_decode(T([2, 0, 0, 0, 3, 0])), torch.eye(3, dtype=F64))


def test_rot6d_encode_trivial():
    assert torch.allclose(K.rot6d_encode(torch.eye(3, dtype=F64)), T([1, 0, 0, 0, 1, 0]))
    assert torch.allclose(
        K.rot6d_encode(torch.diag(T([-1.0, -1.0, 1.0]))), T([-1, 0, 0, 0, -1, 0])
    )


def test_rot6d_round_trip(rng):
    for _ in range(200):
        m = random_rotation(rng)
        assert torch.allclose(K.rot6d_decode(K.rot6d_encode(m)), m, atol=1e-6)


def test_rot6d_decode_always_orthonormal(rng):
    # property: every valid 6-vector decodes to SO(3)
    r6 = torch.as_tensor(rng.normal(size=(10000, 6)))
    m = K.rot6d_decode(r6)
    eye = torch.eye(3, dtype=F64).expand(10000, 3, 3)
    assert torch.allclose(m.transpose(-1, -2) @ m, eye, atol=1e-9)
    assert torch.allclose(torch.linalg.det(m), torch.ones(10000, dtype=F64), atol=1e-9)


def test_rot6d_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        K.rot6d_decode(T([0, 0, 0, 0, 1, 0]))
    with pytest.raises(DegenerateInput):
        K.rot6d_decode(T([1, 0, 0, 2, 0, 0]))


# ---------------------------------------------------------------------------
# rigid transforms
# ---------------------------------------------------------------------------


def hom(t: K.RigidTransform) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = t.rotation.numpy()
    m[:3, 3] = t.translation.numpy()
    return m


def test_compose_identity(rng):
    b = random_transform(rng)
    out = K.compose(K.RigidTransform.identity(), b)
    assert torch.allclose(out.rotation, b.rotation) and torch.allclose(out.translation, b.translation)


def test_invert_identity():
    out = K.invert(K.RigidTransform.identity())
    assert torch.allclose(out.rotation, torch.eye(3, dtype=F64))
    assert torch.allclose(out.translation, torch.zeros(3, dtype=F64))


def test_compose_invert_vs_homogeneous_oracle(rng):
    for _ in range(100):
        a, b = random_transform(rng), random_transform(rng)
        ours = K.compose(a, b)
        oracle = hom(a) @ hom(b)
        assert np.allclose(hom(ours), oracle, atol=1e-9)
        ours_inv = K.invert(a)
        assert np.allclose(hom(ours_inv), np.linalg.inv(hom(a)), atol=1e-9)
        round_trip = K.compose(a, K.invert(a))
        assert np.allclose(hom(round_trip), np.eye(4), atol=1e-9)


def test_geodesic_delta(rng):
    eye = torch.eye(3, dtype=F64)
    r = random_rotation(rng)
    assert torch.allclose(K.geodesic_delta(r, r), eye, atol=1e-12)
    assert torch.allclose(K.geodesic_delta(eye, r), r)
    for _ in range(100):
        a, b = random_rotation(rng), random_rotation(rng)
        delta = K.geodesic_delta(a, b)
        # oracle: plain matrix inverse multiply
        oracle = np.linalg.inv(a.numpy()) @ b.numpy()
        assert np.allclose(delta.numpy(), oracle, atol=1e-9)
        # composing the delta back onto a reproduces b
        assert torch.allclose(a @ delta, b, atol=1e-9)


def test_rotation_angle(rng):
    for _ in range(50):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, np.pi - 1e-6)
        m = K.aa_to_matrix(T(axis * angle))
        assert K.rotation_angle(m).item() == pytest.approx(angle, abs=1e-9)


# ---------------------------------------------------------------------------
# skeleton
# ---------------------------------------------------------------------------


def test_default_skeleton_labels(skel):
    assert skel.joint_count == 22
    assert skel.part_label.count("head") == 1
    assert skel.part_label.count("left_hand") == 1
    assert skel.part_label.count("right_hand") == 1
    upper, lower = skel.part_indices("upper"), skel.part_indices("lower")
    assert len(upper) + len(lower) == 22
    assert set(skel.part_indices("head_hands")) <= set(upper)


def test_skeleton_json_round_trip(skel, tmp_path):
    path = tmp_path / "skel.json"
    skel.save(path)
    again = K.SkeletonSpec.from_file(path)
    assert again.names == skel.names
    assert np.array_equal(again.parent, skel.parent)
    assert torch.equal(again.rest_offset, skel.rest_offset)
    assert again.part_label == skel.part_label


def test_skeleton_validation(tmp_path):
    base = K.default_skeleton().to_dict()
    bad = json.loads(json.dumps(base))
    bad["joints"][5]["parent"] = 9  # breaks topological order
    with pytest.raises(ValueError):
        K.SkeletonSpec.from_dict(bad)
    bad = json.loads(json.dumps(base))
    bad["joints"][15]["part"] = "upper_body"  # no head joint left
    with pytest.raises(ValueError):
        K.SkeletonSpec.from_dict(bad)
    bad = json.loads(json.dumps(base))
    del bad["joints"][0]["offset"]
    with pytest.raises(ValueError):
        K.SkeletonSpec.from_dict(bad)


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------


def rest_positions(skel):
    """Oracle: cumulative rest-offset sums along each parent chain."""
    pos = np.zeros((skel.joint_count, 3))
    for i in range(1, skel.joint_count):
        pos[i] = pos[skel.parent[i]] + skel.rest_offset[i].numpy()
    return pos


def test_fk_zero_pose(skel):
    pose = K.forward_kinematics(skel, torch.zeros(22, 3, dtype=F64), torch.zeros(3, dtype=F64))
    assert np.allclose(pose.positions.numpy(), rest_positions(skel), atol=1e-12)
    eye = torch.eye(3, dtype=F64).expand(22, 3, 3)
    assert torch.allclose(pose.rotations, eye)


def test_fk_translation_equivariance(skel, rng):
    theta = torch.as_tensor(rng.normal(size=(22, 3)) * 0.4)
    gamma = torch.as_tensor(rng.normal(size=3))
    d = torch.as_tensor(rng.normal(size=3))
    a = K.forward_kinematics(skel, theta, gamma)
    b = K.forward_kinematics(skel, theta, gamma + d)
    assert torch.allclose(b.positions, a.positions + d, atol=1e-12)
    assert torch.allclose(b.rotations, a.rotations)


def test_fk_global_rotation_equivariance(skel, rng):
    # pre-rotating the root by R maps every position p to gamma + R (p - gamma)
    for _ in range(20):
        theta = torch.as_tensor(rng.normal(size=(22, 3)) * 0.5)
        gamma = torch.as_tensor(rng.normal(size=3))
        r = random_rotation(rng)
        base = K.forward_kinematics(skel, theta, gamma)
        theta_rot = theta.clone()
        theta_rot[0] = K.matrix_to_aa(r @ K.aa_to_matrix(theta[0]))
        rot = K.forward_kinematics(skel, theta_rot, gamma)
        expected = gamma + (base.positions - gamma) @ r.T
        assert torch.allclose(rot.positions, expected, atol=1e-6)


def test_fk_batched_matches_loop(skel, rng):
    theta = torch.as_tensor(rng.normal(size=(5, 22, 3)) * 0.4)
    gamma = torch.as_tensor(rng.normal(size=(5, 3)))
    batched = K.forward_kinematics(skel, theta, gamma)
    for t in range(5):
        single = K.forward_kinematics(skel, theta[t], gamma[t])
        assert torch.allclose(batched.positions[t], single.positions)
        assert torch.allclose(batched.rotations[t], single.rotations)


def test_fk_shape_mismatch(skel):
    with pytest.raises(ShapeMismatch):
        K.forward_kinematics(skel, torch.zeros(21, 3, dtype=F64), torch.zeros(3, dtype=F64))


def test_fk_jacobian_matches_finite_differences(skel, rng):
    # analytic gradient of one joint position wrt theta vs central differences
    theta = torch.as_tensor(rng.normal(size=(22, 3)) * 0.4).requires_grad_(True)
    gamma = torch.as_tensor(rng.normal(size=3))
    h = 1e-5
    for joint, axis in [(20, 0), (15, 1), (11, 2)]:
        pos = K.forward_kinematics(skel, theta, gamma).positions[joint, axis]
        grad = torch.autograd.grad(pos, theta)[0]
        flat = grad.flatten()
        picks = rng.choice(66, size=12, replace=False)
        with torch.no_grad():
            for idx in picks:
                bump = torch.zeros(66, dtype=F64)
                bump[idx] = h
                bump = bump.reshape(22, 3)
                hi = K.forward_kinematics(skel, theta + bump, gamma).positions[joint, axis]
                lo = K.forward_kinematics(skel, theta - bump, gamma).positions[joint, axis]
                fd = (hi - lo) / (2 * h)
                denom = max(abs(fd.item()), abs(flat[idx].item()), 1e-8)
                assert abs(fd.item() - flat[idx].item()) / denom < 1e-4


def test_extract_hmd(skel, rng):
    theta = torch.as_tensor(rng.normal(size=(22, 3)) * 0.4)
    gamma = torch.as_tensor(rng.normal(size=3))
    pose = K.forward_kinematics(skel, theta, gamma)
    head, left, right = K.extract_hmd(skel, pose)
    assert torch.equal(head.translation, pose.positions[skel.head_index])
    assert torch.equal(left.rotation, pose.rotations[skel.left_hand_index])
    assert torch.equal(right.translation, pose.positions[skel.right_hand_index])
    # rest pose: head transform equals the rest-chain composition to the head joint
    rest = K.forward_kinematics(skel, torch.zeros(22, 3, dtype=F64), torch.zeros(3, dtype=F64))
    h0, _, _ = K.extract_hmd(skel, rest)
    assert np.allclose(h0.translation.numpy(), rest_positions(skel)[skel.head_index])
    assert torch.allclose(h0.rotation, torch.eye(3, dtype=F64))
