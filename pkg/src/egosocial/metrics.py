"""Evaluation metrics for generated pose sequences.

Units follow the common reporting convention: millimeters for joint-position
and trajectory errors, mm/s^2 for acceleration, and a dimensionless Frobenius
norm for orientation. Inputs are in meters; conversion happens here, once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import is_rotation_matrix

MM_PER_M = 1000.0


@dataclass
class MetricsReport:
    mpjpe: float
    orientation_error: float
    translation_error: float
    acceleration_error: float
    frame_count: int
    joint_count: int

    def __post_init__(self):
        values = (self.mpjpe, self.orientation_error, self.translation_error, self.acceleration_error)
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("metrics must be finite and non-negative")

    def to_text(self) -> str:
        return (
            f"mpjpe_mm: {self.mpjpe:.6f}\n"
            f"orientation_error: {self.orientation_error:.6f}\n"
            f"translation_error_mm: {self.translation_error:.6f}\n"
            f"acceleration_error_mm_s2: {self.acceleration_error:.6f}\n"
            f"frame_count: {self.frame_count}\n"
            f"joint_count: {self.joint_count}\n"
        )


def _check_joint_arrays(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if pred.ndim != 3 or pred.shape[2] != 3 or pred.shape[0] * pred.shape[1] < 1:
        raise ValueError(f"expected T x J x 3 arrays, got {pred.shape}")
    return pred, gt


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error: mean Euclidean joint distance, in mm."""
    pred, gt = _check_joint_arrays(pred, gt)
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * MM_PER_M)


def orientation_error(rot_pred, rot_gt) -> float:
    """Mean over frames of ||R_pred @ R_gt^T - I||_F (dimensionless)."""
    rot_pred = np.asarray(rot_pred, dtype=np.float64)
    rot_gt = np.asarray(rot_gt, dtype=np.float64)
    if rot_pred.shape != rot_gt.shape or rot_pred.ndim != 3 or rot_pred.shape[1:] != (3, 3):
        raise ValueError(f"expected matching T x 3 x 3 arrays, got {rot_pred.shape} / {rot_gt.shape}")
    for r in (rot_pred, rot_gt):
        for frame in r:
            if not is_rotation_matrix(frame, tol=1e-4):
                raise ValueError("orientation inputs must be rotation matrices")
    rel = np.einsum("tij,tkj->tik", rot_pred, rot_gt) - np.eye(3)
    return float(np.linalg.norm(rel, axis=(1, 2)).mean())


def translation_error(traj_pred, traj_gt) -> float:
    """Mean Euclidean distance between root trajectories, in mm."""
    traj_pred = np.asarray(traj_pred, dtype=np.float64)
    traj_gt = np.asarray(traj_gt, dtype=np.float64)
    if traj_pred.shape != traj_gt.shape or traj_pred.ndim != 2 or traj_pred.shape[1] != 3:
        raise ValueError(f"expected matching T x 3 arrays, got {traj_pred.shape} / {traj_gt.shape}")
    return float(np.linalg.norm(traj_pred - traj_gt, axis=-1).mean() * MM_PER_M)


def acceleration_error(pred, gt, fps: float) -> float:
    """Mean Euclidean distance between discrete joint accelerations, in mm/s^2.

    Acceleration uses the centered second difference p_{t+1} - 2 p_t + p_{t-1},
    scaled by fps^2 to express it per second squared.
    """
    pred, gt = _check_joint_arrays(pred, gt)
    if pred.shape[0] < 3:
        raise ValueError("acceleration needs at least 3 frames")
    if not fps > 0:
        raise ValueError("fps must be positive")
    acc_pred = pred[2:] - 2.0 * pred[1:-1] + pred[:-2]
    acc_gt = gt[2:] - 2.0 * gt[1:-1] + gt[:-2]
    diff = np.linalg.norm(acc_pred - acc_gt, axis=-1)
    return float(diff.mean() * fps * fps * MM_PER_M)


def sequence_report(joints_pred, joints_gt, rot_pred, rot_gt, transl_pred, transl_gt, fps: float) -> MetricsReport:
    """All four metrics for one predicted/ground-truth sequence pair."""
    joints_pred = np.asarray(joints_pred, dtype=np.float64)
    return MetricsReport(
        mpjpe=mpjpe(joints_pred, joints_gt),
        orientation_error=orientation_error(rot_pred, rot_gt),
        translation_error=translation_error(transl_pred, transl_gt),
        acceleration_error=acceleration_error(joints_pred, joints_gt, fps),
        frame_count=int(joints_pred.shape[0]),
        joint_count=int(joints_pred.shape[1]),
    )


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    """Average a list of per-sequence reports into one summary."""
    if not reports:
        raise ValueError("cannot average an empty report list")
    return MetricsReport(
        mpjpe=float(np.mean([r.mpjpe for r in reports])),
        orientation_error=float(np.mean([r.orientation_error for r in reports])),
        translation_error=float(np.mean([r.translation_error for r in reports])),
        acceleration_error=float(np.mean([r.acceleration_error for r in reports])),
        frame_count=int(sum(r.frame_count for r in reports)),
        joint_count=reports[0].joint_count,
    )
