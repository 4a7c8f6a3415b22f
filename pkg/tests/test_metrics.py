import numpy as np
import pytest

from egosocial import metrics as M
from egosocial.kinematics import axis_angle_to_matrix

from conftest import random_rotation


def mpjpe_oracle(pred, gt):
    """Scalar-loop reference implementation."""
    total = 0.0
    t, j, _ = pred.shape
    for ti in range(t):
        for ji in range(j):
            d = 0.0
            for c in range(3):
                d += (pred[ti, ji, c] - gt[ti, ji, c]) ** 2
            total += d ** 0.5
    return total / (t * j) * 1000.0


def translation_oracle(pred, gt):
    total = 0.0
    for ti in range(pred.shape[0]):
        d = sum((pred[ti, c] - gt[ti, c]) ** 2 for c in range(3))
        total += d ** 0.5
    return total / pred.shape[0] * 1000.0


def orientation_oracle(rp, rg):
    total = 0.0
    for ti in range(rp.shape[0]):
        rel = rp[ti] @ rg[ti].T - np.eye(3)
        s = 0.0
        for a in range(3):
            for b in range(3):
                s += rel[a, b] ** 2
        total += s ** 0.5
    return total / rp.shape[0]


def acceleration_oracle(pred, gt, fps):
    t, j, _ = pred.shape
    total = 0.0
    for ti in range(1, t - 1):
        for ji in range(j):
            d = 0.0
            for c in range(3):
                ap = pred[ti + 1, ji, c] - 2 * pred[ti, ji, c] + pred[ti - 1, ji, c]
                ag = gt[ti + 1, ji, c] - 2 * gt[ti, ji, c] + gt[ti - 1, ji, c]
                d += (ap - ag) ** 2
            total += d ** 0.5
    return total / ((t - 2) * j) * fps * fps * 1000.0


class TestMpjpe:
    def test_zero_on_identical(self, rng):
        x = rng.normal(size=(4, 5, 3))
        assert M.mpjpe(x, x) == 0.0

    def test_three_four_five(self):
        gt = np.zeros((1, 1, 3))
        pred = np.array([[[0.003, 0.004, 0.0]]])
        assert np.isclose(M.mpjpe(pred, gt), 5.0, rtol=1e-12)

    def test_constant_offset(self, rng):
        gt = rng.normal(size=(6, 7, 3))
        d = np.array([0.01, -0.02, 0.02])
        assert np.isclose(M.mpjpe(gt + d, gt), np.linalg.norm(d) * 1000, rtol=1e-12)

    def test_matches_oracle(self, rng):
        pred = rng.normal(size=(5, 8, 3))
        gt = rng.normal(size=(5, 8, 3))
        assert np.isclose(M.mpjpe(pred, gt), mpjpe_oracle(pred, gt), rtol=1e-9)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            M.mpjpe(np.zeros((2, 3, 3)), np.zeros((2, 4, 3)))

    def test_joint_relabeling_invariance(self, rng):
        pred = rng.normal(size=(5, 8, 3))
        gt = rng.normal(size=(5, 8, 3))
        perm = rng.permutation(8)
        assert np.isclose(M.mpjpe(pred, gt), M.mpjpe(pred[:, perm], gt[:, perm]), rtol=1e-12)


class TestOrientationError:
    def test_zero_on_identical(self, rng):
        rots = np.stack([random_rotation(rng) for _ in range(4)])
        assert M.orientation_error(rots, rots) < 1e-12

    def test_half_turn_is_2root2(self):
        rz_pi = axis_angle_to_matrix([0, 0, np.pi])
        err = M.orientation_error(rz_pi[None], np.eye(3)[None])
        assert np.isclose(err, 2 * np.sqrt(2), rtol=1e-12)

    def test_closed_form_for_z_rotations(self, rng):
        for theta in rng.uniform(-np.pi, np.pi, size=20):
            r = axis_angle_to_matrix([0, 0, theta])
            err = M.orientation_error(r[None], np.eye(3)[None])
            assert np.isclose(err, 2 * np.sqrt(2) * abs(np.sin(theta / 2)), rtol=1e-9)

    def test_matches_oracle(self, rng):
        rp = np.stack([random_rotation(rng) for _ in range(5)])
        rg = np.stack([random_rotation(rng) for _ in range(5)])
        assert np.isclose(M.orientation_error(rp, rg), orientation_oracle(rp, rg), rtol=1e-9)

    def test_rejects_non_rotation(self):
        bad = np.eye(3)[None] * 1.5
        with pytest.raises(ValueError):
            M.orientation_error(bad, np.eye(3)[None])


class TestTranslationError:
    def test_zero_on_identical(self, rng):
        x = rng.normal(size=(7, 3))
        assert M.translation_error(x, x) == 0.0

    def test_worked_offset(self):
        gt = np.zeros((4, 3))
        pred = gt + np.array([0.001, 0.002, 0.002])
        assert np.isclose(M.translation_error(pred, gt), 3.0, rtol=1e-12)

    def test_homogeneity(self, rng):
        gt = rng.normal(size=(5, 3))
        d = rng.normal(size=(5, 3))
        e1 = M.translation_error(gt + d, gt)
        e2 = M.translation_error(gt + 2.5 * d, gt)
        assert np.isclose(e2, 2.5 * e1, rtol=1e-12)

    def test_matches_oracle(self, rng):
        pred, gt = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        assert np.isclose(M.translation_error(pred, gt), translation_oracle(pred, gt), rtol=1e-9)


class TestAccelerationError:
    def test_zero_on_identical(self, rng):
        x = rng.normal(size=(6, 4, 3))
        assert M.acceleration_error(x, x, fps=30) == 0.0

    def test_linear_motion_cancels(self, rng):
        t = np.arange(10)[:, None, None]
        pred = t * np.array([0.3, -0.1, 0.2]) + rng.normal(size=(1, 5, 3))
        gt = t * np.array([-0.2, 0.4, 0.0]) + rng.normal(size=(1, 5, 3))
        assert M.acceleration_error(pred, gt, fps=30) < 1e-9

    def test_quadratic_motion_recovers_acceleration(self):
        fps = 30.0
        a = np.array([1.7, 0.0, 0.0])  # m/s^2
        t = np.arange(12) / fps
        gt = np.zeros((12, 1, 3))
        pred = 0.5 * a * t[:, None, None] ** 2
        err = M.acceleration_error(pred, gt, fps=fps)
        assert np.isclose(err, np.linalg.norm(a) * 1000, rtol=1e-9)

    def test_shared_linear_motion_invariance(self, rng):
        pred = rng.normal(size=(8, 3, 3))
        gt = rng.normal(size=(8, 3, 3))
        drift = np.arange(8)[:, None, None] * np.array([0.1, 0.2, -0.3])
        base = M.acceleration_error(pred, gt, fps=30)
        shifted = M.acceleration_error(pred + drift, gt + drift, fps=30)
        assert np.isclose(base, shifted, rtol=1e-9, atol=1e-12)

    def test_matches_oracle(self, rng):
        pred, gt = rng.normal(size=(7, 4, 3)), rng.normal(size=(7, 4, 3))
        assert np.isclose(
            M.acceleration_error(pred, gt, fps=30),
            acceleration_oracle(pred, gt, 30.0),
            rtol=1e-9,
        )

    def test_needs_three_frames(self):
        with pytest.raises(ValueError):
            M.acceleration_error(np.zeros((2, 1, 3)), np.zeros((2, 1, 3)), fps=30)


class TestReports:
    def test_mean_report(self):
        a = M.MetricsReport(10, 0.1, 20, 1.0, frame_count=5, joint_count=24)
        b = M.MetricsReport(30, 0.3, 40, 3.0, frame_count=5, joint_count=24)
        m = M.mean_report([a, b])
        assert m.mpjpe == 20 and m.translation_error == 30

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            M.MetricsReport(-1, 0, 0, 0, frame_count=1, joint_count=1)

    def test_text_round_trips_keys(self):
        r = M.MetricsReport(1.5, 0.25, 2.5, 0.75, frame_count=3, joint_count=24)
        text = r.to_text()
        assert "mpjpe_mm: 1.5" in text and "acceleration_error_mm_s2: 0.75" in text
