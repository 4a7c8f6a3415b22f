"""Rotation algebra and forward kinematics for an SMPL-parameter-layout skeleton.

A pose vector is laid out as ``[global_orient(3) | body_pose(3*(J-1)) | transl(3)]``,
axis-angle per joint in radians, translation in meters. With the default
J = 24 joints the vector has V = 75 entries, matching the SMPL pose-parameter
count so that real capture data can be dropped in later. Shape (beta)
parameters and mesh skinning are out of scope; the body is skeleton-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Canonical body frame: +Y up, +Z forward (the gaze axis), +X to the body's left.
FORWARD_AXIS = np.array([0.0, 0.0, 1.0])
UP_AXIS = np.array([0.0, 1.0, 0.0])

JOINT_NAMES = [
    "pelvis", "left_hip", "right_hip", "spine1",
    "left_knee", "right_knee", "spine2",
    "left_ankle", "right_ankle", "spine3",
    "left_foot", "right_foot", "neck",
    "left_collar", "right_collar", "head",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hand", "right_hand",
]

PARENTS = np.array(
    [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21],
    dtype=np.int64,
)

ROOT_JOINT = 0
HEAD_JOINT = 15
LEFT_SHOULDER = 16
RIGHT_SHOULDER = 17

# Hand-authored humanoid rest offsets (meters, parent frame, T-pose, arms along ±X).
# These stand in for a learned template skeleton, which is out of scope here.
REST_OFFSETS = np.array(
    [
        [0.000, 0.000, 0.000],   # pelvis (root)
        [0.090, -0.090, 0.000],  # left_hip
        [-0.090, -0.090, 0.000], # right_hip
        [0.000, 0.110, 0.000],   # spine1
        [0.000, -0.380, 0.000],  # left_knee
        [0.000, -0.380, 0.000],  # right_knee
        [0.000, 0.120, 0.000],   # spine2
        [0.000, -0.400, 0.000],  # left_ankle
        [0.000, -0.400, 0.000],  # right_ankle
        [0.000, 0.120, 0.000],   # spine3
        [0.000, -0.060, 0.120],  # left_foot
        [0.000, -0.060, 0.120],  # right_foot
        [0.000, 0.100, 0.000],   # neck
        [0.070, 0.060, 0.000],   # left_collar
        [-0.070, 0.060, 0.000],  # right_collar
        [0.000, 0.120, 0.000],   # head
        [0.090, 0.000, 0.000],   # left_shoulder
        [-0.090, 0.000, 0.000],  # right_shoulder
        [0.260, 0.000, 0.000],   # left_elbow
        [-0.260, 0.000, 0.000],  # right_elbow
        [0.250, 0.000, 0.000],   # left_wrist
        [-0.250, 0.000, 0.000],  # right_wrist
        [0.080, 0.000, 0.000],   # left_hand
        [-0.080, 0.000, 0.000],  # right_hand
    ],
    dtype=np.float64,
)

_SMALL_ANGLE = 1e-8


def pose_dim(joint_count: int) -> int:
    """Length of a pose vector for a skeleton with ``joint_count`` joints."""
    return 3 * joint_count + 3


@dataclass(frozen=True)
class BodyModel:
    """Kinematic tree: per-joint parent indices and rest offsets in the parent frame."""

    parents: np.ndarray
    rest_offsets: np.ndarray

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        offsets = np.asarray(self.rest_offsets, dtype=np.float64)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_offsets", offsets)
        j = parents.shape[0]
        if offsets.shape != (j, 3):
            raise ValueError(f"rest_offsets shape {offsets.shape} does not match {j} joints")
        if j < 1 or parents[0] != -1:
            raise ValueError("joint 0 must be the single root (parent -1)")
        if np.any(parents[1:] < 0) or np.any(parents[1:] >= np.arange(1, j)):
            raise ValueError("non-root parents must satisfy 0 <= parent < child")
        if not np.all(np.isfinite(offsets)):
            raise ValueError("rest offsets must be finite")
        if np.any(offsets[0] != 0.0):
            raise ValueError("root rest offset must be zero")

    @property
    def joint_count(self) -> int:
        return int(self.parents.shape[0])

    @property
    def pose_dim(self) -> int:
        return pose_dim(self.joint_count)


def default_body() -> BodyModel:
    """The 24-joint humanoid used throughout as the stand-in skeleton."""
    return BodyModel(parents=PARENTS.copy(), rest_offsets=REST_OFFSETS.copy())


@dataclass
class PoseSequence:
    """F pose vectors sharing one layout, plus the capture frame rate."""

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("frames must be a non-empty F x V array")
        if (frames.shape[1] - 3) % 3 != 0 or frames.shape[1] < 9:
            raise ValueError(f"pose width {frames.shape[1]} is not 3*J+3 for J >= 2")
        if not np.all(np.isfinite(frames)):
            raise ValueError("pose values must be finite")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        self.frames = frames

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def pose_dim(self) -> int:
        return int(self.frames.shape[1])

    @property
    def joint_count(self) -> int:
        return (self.pose_dim - 3) // 3

    @property
    def global_orient(self) -> np.ndarray:
        """F x 3 root axis-angle."""
        return self.frames[:, :3]

    @property
    def body_pose(self) -> np.ndarray:
        """F x 3(J-1) non-root axis-angles."""
        return self.frames[:, 3:-3]

    @property
    def transl(self) -> np.ndarray:
        """F x 3 root translation (meters)."""
        return self.frames[:, -3:]


def _check_finite_vec3(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def axis_angle_to_matrix(aa) -> np.ndarray:
    """Rodrigues' formula; first-order expansion below the small-angle threshold."""
    aa = _check_finite_vec3(aa, "axis-angle")
    theta = float(np.linalg.norm(aa))
    kx, ky, kz = aa
    skew = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    if theta < _SMALL_ANGLE:
        return np.eye(3) + skew
    k1 = np.sin(theta) / theta
    k2 = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + k1 * skew + k2 * (skew @ skew)


def is_rotation_matrix(r: np.ndarray, tol: float = 1e-6) -> bool:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        return False
    return abs(np.linalg.det(r) - 1.0) <= tol


def _check_rotation(r, tol: float = 1e-4) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if not is_rotation_matrix(r, tol=tol):
        raise ValueError("input is not a rotation matrix (orthonormality/det within tolerance)")
    return r


def matrix_to_axis_angle(r) -> np.ndarray:
    """Inverse of :func:`axis_angle_to_matrix`; angle in [0, pi], axis sign free at pi."""
    r = _check_rotation(r)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < _SMALL_ANGLE:
        return np.zeros(3)
    if np.pi - theta > 1e-6:
        axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
        axis /= 2.0 * np.sin(theta)
        return theta * axis
    # Near pi the skew part vanishes; (R + I)/2 approaches outer(axis, axis).
    m = (r + np.eye(3)) / 2.0
    k = int(np.argmax(np.diag(m)))
    axis = m[:, k] / np.sqrt(max(m[k, k], 1e-12))
    axis /= np.linalg.norm(axis)
    # Align with the residual skew component while it still carries sign information.
    skew_vec = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if float(axis @ skew_vec) < 0.0:
        axis = -axis
    return theta * axis


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)
    raise ValueError(f"unknown axis {axis!r}")


def euler_to_matrix(angles, order: str = "zyx") -> np.ndarray:
    """Compose intrinsic rotations ``R = R_order[0](a0) @ R_order[1](a1) @ R_order[2](a2)``."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (3,):
        raise ValueError("expected 3 angles")
    order = order.lower()
    if len(order) != 3 or set(order) - set("xyz") or len(set(order)) != 3:
        raise ValueError(f"order must be a permutation of 'xyz', got {order!r}")
    r = np.eye(3)
    for axis, angle in zip(order, angles):
        r = r @ _axis_rotation(axis, float(angle))
    return r


_GIMBAL_MARGIN = 1e-9


def matrix_to_euler(r, order: str = "zyx", with_flag: bool = False):
    """Decompose a rotation into intrinsic Tait-Bryan angles.

    Supported orders: ``"zyx"`` (yaw about Z, then pitch about Y, then roll
    about X — the default) and ``"yxz"`` (yaw about the vertical Y axis of the
    body frame). In the gimbal-lock region (|middle angle| = pi/2) the roll is
    pinned to 0 and the canonical solution is returned; pass ``with_flag=True``
    to also receive the lock indicator.
    """
    r = _check_rotation(r)
    order = order.lower()
    locked = False
    if order == "zyx":
        sp = -r[2, 0]
        if abs(sp) >= 1.0 - _GIMBAL_MARGIN:
            locked = True
            pitch = np.pi / 2.0 * np.sign(sp)
            yaw = np.arctan2(-r[0, 1], r[1, 1])
            roll = 0.0
        else:
            pitch = np.arcsin(sp)
            yaw = np.arctan2(r[1, 0], r[0, 0])
            roll = np.arctan2(r[2, 1], r[2, 2])
    elif order == "yxz":
        sp = -r[1, 2]
        if abs(sp) >= 1.0 - _GIMBAL_MARGIN:
            locked = True
            pitch = np.pi / 2.0 * np.sign(sp)
            yaw = np.arctan2(np.sign(sp) * r[0, 1], r[0, 0])
            roll = 0.0
        else:
            pitch = np.arcsin(sp)
            yaw = np.arctan2(r[0, 2], r[2, 2])
            roll = np.arctan2(r[1, 0], r[1, 1])
    else:
        raise ValueError(f"unsupported euler order {order!r} (use 'zyx' or 'yxz')")
    angles = np.array([yaw, pitch, roll], dtype=np.float64)
    if with_flag:
        return angles, locked
    return angles


def _pose_rotations(pose: np.ndarray, joint_count: int) -> np.ndarray:
    rots = np.empty((joint_count, 3, 3))
    for j in range(joint_count):
        rots[j] = axis_angle_to_matrix(pose[3 * j : 3 * j + 3])
    return rots


def forward_kinematics(pose, body: BodyModel) -> np.ndarray:
    """World positions (J x 3, meters) of every joint for one pose vector.

    The root joint sits at ``transl``; each child offset is carried by its
    parent's accumulated world rotation.
    """
    pose = np.asarray(pose, dtype=np.float64).reshape(-1)
    if pose.shape[0] != body.pose_dim:
        raise ValueError(f"pose length {pose.shape[0]} does not match body V={body.pose_dim}")
    if not np.all(np.isfinite(pose)):
        raise ValueError("pose must be finite")
    j = body.joint_count
    rots = _pose_rotations(pose, j)
    transl = pose[-3:]
    world_rot = np.empty((j, 3, 3))
    rel_pos = np.zeros((j, 3))
    world_rot[0] = rots[0]
    for idx in range(1, j):
        p = body.parents[idx]
        rel_pos[idx] = rel_pos[p] + world_rot[p] @ body.rest_offsets[idx]
        world_rot[idx] = world_rot[p] @ rots[idx]
    # translation enters as the single final add, keeping equivariance exact
    return rel_pos + transl


def global_joint_rotations(pose, body: BodyModel) -> np.ndarray:
    """World rotation (J x 3 x 3) of every joint: the chain product down the tree."""
    pose = np.asarray(pose, dtype=np.float64).reshape(-1)
    if pose.shape[0] != body.pose_dim:
        raise ValueError(f"pose length {pose.shape[0]} does not match body V={body.pose_dim}")
    j = body.joint_count
    rots = _pose_rotations(pose, j)
    world = np.empty((j, 3, 3))
    world[0] = rots[0]
    for idx in range(1, j):
        world[idx] = world[body.parents[idx]] @ rots[idx]
    return world


def sequence_joints(seq: PoseSequence, body: BodyModel) -> np.ndarray:
    """FK over a whole sequence: F x J x 3 world joint positions."""
    return np.stack([forward_kinematics(f, body) for f in seq.frames])


def head_rotations(seq: PoseSequence, body: BodyModel) -> np.ndarray:
    """Per-frame world rotation of the head joint (F x 3 x 3)."""
    return np.stack([global_joint_rotations(f, body)[HEAD_JOINT] for f in seq.frames])


def head_positions(seq: PoseSequence, body: BodyModel) -> np.ndarray:
    """Per-frame world position of the head joint (F x 3)."""
    return np.stack([forward_kinematics(f, body)[HEAD_JOINT] for f in seq.frames])
