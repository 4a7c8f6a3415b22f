import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from egosocial import kinematics as K
from egosocial.fk_torch import axis_angle_to_matrix_torch, forward_kinematics_torch

from conftest import random_rotation


def _angles(n):
    return st.lists(st.floats(-np.pi, np.pi, allow_nan=False), min_size=n, max_size=n)


class TestAxisAngle:
    def test_zero_is_identity(self):
        assert np.allclose(K.axis_angle_to_matrix([0, 0, 0]), np.eye(3))

    def test_quarter_turn_about_z(self):
        expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        assert np.allclose(K.axis_angle_to_matrix([0, 0, np.pi / 2]), expected, atol=1e-12)

    def test_round_trip_random(self, rng):
        for _ in range(1000):
            aa = rng.normal(size=3)
            aa *= rng.uniform(0, 0.99 * np.pi) / np.linalg.norm(aa)
            back = K.matrix_to_axis_angle(K.axis_angle_to_matrix(aa))
            assert np.linalg.norm(back - aa) < 1e-6

    def test_round_trip_against_scipy(self, rng):
        scipy_rot = pytest.importorskip("scipy.spatial.transform").Rotation
        for _ in range(200):
            aa = rng.normal(size=3)
            ours = K.axis_angle_to_matrix(aa)
            theirs = scipy_rot.from_rotvec(aa).as_matrix()
            assert np.abs(ours - theirs).max() < 1e-12

    def test_half_turn_branch(self):
        aa = K.matrix_to_axis_angle(K.axis_angle_to_matrix([0, 0, np.pi]))
        assert np.isclose(np.linalg.norm(aa), np.pi)
        assert np.allclose(np.abs(aa / np.linalg.norm(aa)), [0, 0, 1], atol=1e-9)

    def test_identity_maps_to_zero(self):
        assert np.allclose(K.matrix_to_axis_angle(np.eye(3)), 0)

    def test_angle_in_upper_range(self, rng):
        for _ in range(50):
            aa = K.matrix_to_axis_angle(random_rotation(rng))
            assert 0 <= np.linalg.norm(aa) <= np.pi + 1e-12

    def test_small_angle_branch(self):
        aa = np.array([1e-10, -2e-10, 5e-11])
        r = K.axis_angle_to_matrix(aa)
        assert K.is_rotation_matrix(r, tol=1e-8)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            K.axis_angle_to_matrix([np.nan, 0, 0])

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            K.matrix_to_axis_angle(np.eye(3) * 2)

    def test_produced_matrices_are_rotations(self, rng):
        for _ in range(200):
            r = K.axis_angle_to_matrix(rng.normal(size=3) * 2)
            assert K.is_rotation_matrix(r, tol=1e-6)


class TestEuler:
    def test_identity(self):
        assert np.allclose(K.matrix_to_euler(np.eye(3)), 0)

    def test_pure_yaw(self):
        r = K.euler_to_matrix([np.pi / 2, 0, 0])
        assert np.allclose(K.matrix_to_euler(r), [np.pi / 2, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("order", ["zyx", "yxz"])
    def test_round_trip_1000(self, order, rng):
        for _ in range(1000):
            r = random_rotation(rng)
            back = K.euler_to_matrix(K.matrix_to_euler(r, order=order), order=order)
            assert np.abs(back - r).max() < 1e-6

    def test_gimbal_lock_flagged_with_zero_roll(self):
        r = K.euler_to_matrix([0.4, np.pi / 2, 0.3])
        angles, locked = K.matrix_to_euler(r, with_flag=True)
        assert locked
        assert angles[2] == 0.0
        # the canonical solution must still reconstruct the rotation
        assert np.abs(K.euler_to_matrix(angles) - r).max() < 1e-9

    def test_unlocked_flag_false(self, rng):
        _, locked = K.matrix_to_euler(random_rotation(rng), with_flag=True)
        assert isinstance(locked, bool)

    def test_unknown_order_rejected(self):
        with pytest.raises(ValueError):
            K.matrix_to_euler(np.eye(3), order="zzz")

    @settings(max_examples=50, deadline=None)
    @given(_angles(3))
    def test_euler_matrices_are_rotations(self, angles):
        assert K.is_rotation_matrix(K.euler_to_matrix(angles), tol=1e-9)


class TestBodyModel:
    def test_default_body_valid(self, body):
        assert body.joint_count == 24
        assert body.pose_dim == 75

    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            K.BodyModel(parents=[-1, 2, 1], rest_offsets=np.zeros((3, 3)))

    def test_rejects_nonzero_root_offset(self):
        with pytest.raises(ValueError):
            K.BodyModel(parents=[-1, 0], rest_offsets=[[0.1, 0, 0], [1, 0, 0]])

    def test_rejects_second_root(self):
        with pytest.raises(ValueError):
            K.BodyModel(parents=[0, -1], rest_offsets=np.zeros((2, 3)))


class TestForwardKinematics:
    def test_rest_pose_accumulates_offsets(self, body):
        pose = np.zeros(body.pose_dim)
        joints = K.forward_kinematics(pose, body)
        # spine chain: pelvis -> spine1 -> spine2 -> spine3 -> neck -> head
        expected_head_y = 0.11 + 0.12 + 0.12 + 0.10 + 0.12
        assert np.isclose(joints[K.HEAD_JOINT, 1], expected_head_y)
        assert np.allclose(joints[0], 0)

    def test_translation_equivariance_exact(self, body, rng):
        # translation is the final add, so FK(transl=u) is bitwise FK(transl=0) + u
        pose = rng.normal(scale=0.3, size=body.pose_dim)
        zeroed = pose.copy()
        zeroed[-3:] = 0
        assert np.array_equal(
            K.forward_kinematics(pose, body),
            K.forward_kinematics(zeroed, body) + pose[-3:],
        )

    def test_translation_equivariance_general(self, body, rng):
        pose = rng.normal(scale=0.3, size=body.pose_dim)
        for _ in range(20):
            t = rng.normal(size=3) * 5
            shifted = pose.copy()
            shifted[-3:] += t
            assert np.abs(
                K.forward_kinematics(shifted, body) - (K.forward_kinematics(pose, body) + t)
            ).max() < 1e-12

    def test_global_rotation_equivariance(self, body, rng):
        pose = rng.normal(scale=0.3, size=body.pose_dim)
        pose[-3:] = 0
        q_aa = rng.normal(size=3)
        q = K.axis_angle_to_matrix(q_aa)
        pre = pose.copy()
        pre[:3] = K.matrix_to_axis_angle(q @ K.axis_angle_to_matrix(pose[:3]))
        rotated = K.forward_kinematics(pre, body)
        assert np.abs(rotated - K.forward_kinematics(pose, body) @ q.T).max() < 1e-6

    def test_two_joint_chain(self):
        body2 = K.BodyModel(parents=[-1, 0], rest_offsets=[[0, 0, 0], [1, 0, 0]])
        pose = np.zeros(9)
        pose[:3] = [0, 0, np.pi / 2]
        joints = K.forward_kinematics(pose, body2)
        assert np.allclose(joints[1], [0, 1, 0], atol=1e-12)

    def test_length_mismatch_rejected(self, body):
        with pytest.raises(ValueError):
            K.forward_kinematics(np.zeros(body.pose_dim + 3), body)

    def test_torch_matches_numpy(self, body, rng):
        poses = rng.normal(scale=0.5, size=(6, body.pose_dim))
        ours = np.stack([K.forward_kinematics(p, body) for p in poses])
        theirs = forward_kinematics_torch(torch.tensor(poses), body).numpy()
        assert np.abs(ours - theirs).max() < 1e-12

    def test_torch_rodrigues_matches_numpy(self, rng):
        aa = rng.normal(size=(32, 3))
        ours = np.stack([K.axis_angle_to_matrix(a) for a in aa])
        theirs = axis_angle_to_matrix_torch(torch.tensor(aa)).numpy()
        assert np.abs(ours - theirs).max() < 1e-12


class TestPoseSequence:
    def test_layout_views(self, rng):
        seq = K.PoseSequence(frames=rng.normal(size=(5, 75)).astype(np.float32))
        assert seq.global_orient.shape == (5, 3)
        assert seq.body_pose.shape == (5, 69)
        assert seq.transl.shape == (5, 3)
        assert seq.joint_count == 24

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            K.PoseSequence(frames=np.zeros((0, 75)))

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            K.PoseSequence(frames=np.zeros((3, 74)))

    def test_rejects_non_finite(self):
        frames = np.zeros((2, 75), dtype=np.float32)
        frames[1, 3] = np.inf
        with pytest.raises(ValueError):
            K.PoseSequence(frames=frames)

    def test_rejects_bad_fps(self):
        with pytest.raises(ValueError):
            K.PoseSequence(frames=np.zeros((2, 75)), fps=0)
