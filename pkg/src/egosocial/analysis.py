"""Interaction strata: interpersonal distance, mutual gaze, future conditioning.

Distance strata use the root-joint trajectory with boundaries [0,1), [1,2),
[2, inf) meters, a sequence assigned by its median per-frame distance. Gaze
uses the head's world rotation applied to the canonical +Z forward axis;
"mutual" means both agents' gaze rays lie within a threshold angle of the
line of sight between their roots.
"""

from __future__ import annotations

import numpy as np

from .kinematics import (
    BodyModel,
    FORWARD_AXIS,
    PoseSequence,
    _axis_rotation,
    head_rotations,
    matrix_to_euler,
    _check_rotation,
)

DISTANCE_LABELS = ("near", "mid", "far")
GAZE_LABELS = ("mutual", "non_mutual")


def root_distance(p_w: PoseSequence, p_i: PoseSequence) -> np.ndarray:
    """Per-frame Euclidean distance between the two root translations (meters)."""
    if p_w.num_frames != p_i.num_frames:
        raise ValueError("sequences must have equal frame counts")
    return np.linalg.norm(
        p_w.transl.astype(np.float64) - p_i.transl.astype(np.float64), axis=-1
    )


def distance_label(median_distance: float) -> str:
    if median_distance < 1.0:
        return "near"
    if median_distance < 2.0:
        return "mid"
    return "far"


def stratify_by_distance(pairs) -> dict[str, list]:
    """Partition (wearer, interactee) pairs into near/mid/far by median distance.

    ``pairs`` is a sequence of objects with ``wearer``/``interactee``
    attributes (episodes) or 2-tuples of PoseSequence.
    """
    strata = {label: [] for label in DISTANCE_LABELS}
    for item in pairs:
        p_w, p_i = _unpack_pair(item)
        med = float(np.median(root_distance(p_w, p_i)))
        strata[distance_label(med)].append(item)
    return strata


def gaze_direction(head_rotation: np.ndarray) -> np.ndarray:
    """Unit gaze ray: the head rotation applied to the +Z forward axis."""
    r = _check_rotation(head_rotation)
    v = r @ FORWARD_AXIS
    return v / np.linalg.norm(v)


def gaze_direction_euler(head_rotation: np.ndarray) -> np.ndarray:
    """Gaze ray recovered through a yaw/pitch Euler decomposition (vertical yaw).

    Kept as the rotation-to-Euler route; agrees with :func:`gaze_direction`
    because a roll about the forward axis does not move the forward axis.
    """
    yaw, pitch, _ = matrix_to_euler(head_rotation, order="yxz")
    r = _axis_rotation("y", float(yaw)) @ _axis_rotation("x", float(pitch))
    v = r @ FORWARD_AXIS
    return v / np.linalg.norm(v)


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    cos = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def mutual_gaze(
    p_w: PoseSequence,
    p_i: PoseSequence,
    theta_deg: float,
    body: BodyModel,
    mode: str = "line_of_sight",
) -> np.ndarray:
    """Per-frame mutual-gaze booleans.

    ``line_of_sight`` (default): each agent's gaze ray must lie within
    theta of the direction to the other agent's root; frames with coincident
    roots are False. ``gaze_vs_gaze``: the two gaze rays must be anti-aligned
    within theta (alternative reading, kept for comparison).
    """
    if p_w.num_frames != p_i.num_frames:
        raise ValueError("sequences must have equal frame counts")
    if not 0.0 < theta_deg < 180.0:
        raise ValueError("theta must be in (0, 180) degrees")
    if mode not in ("line_of_sight", "gaze_vs_gaze"):
        raise ValueError(f"unknown mode {mode!r}")
    rot_w = head_rotations(p_w, body)
    rot_i = head_rotations(p_i, body)
    out = np.zeros(p_w.num_frames, dtype=bool)
    for f in range(p_w.num_frames):
        gaze_w = gaze_direction(rot_w[f])
        gaze_i = gaze_direction(rot_i[f])
        if mode == "gaze_vs_gaze":
            out[f] = _angle_between(gaze_w, -gaze_i) <= theta_deg
            continue
        to_i = p_i.transl[f].astype(np.float64) - p_w.transl[f].astype(np.float64)
        dist = np.linalg.norm(to_i)
        if dist < 1e-9:
            continue
        out[f] = (
            _angle_between(gaze_w, to_i) <= theta_deg
            and _angle_between(gaze_i, -to_i) <= theta_deg
        )
    return out


def stratify_by_gaze(pairs, theta_deg: float, body: BodyModel, mode: str = "line_of_sight") -> dict[str, list]:
    """Partition pairs into mutual / non_mutual; mutual iff >= 50% of frames are."""
    strata = {label: [] for label in GAZE_LABELS}
    for item in pairs:
        p_w, p_i = _unpack_pair(item)
        flags = mutual_gaze(p_w, p_i, theta_deg, body, mode=mode)
        label = "mutual" if flags.mean() >= 0.5 else "non_mutual"
        strata[label].append(item)
    return strata


def future_shift(p_i: PoseSequence, offset_frames: int, window_frames: int) -> PoseSequence:
    """Interactee window displaced forward: frames [offset, offset + window)."""
    if offset_frames < 0:
        raise ValueError("offset must be >= 0")
    if window_frames < 1:
        raise ValueError("window must be >= 1")
    if offset_frames + window_frames > p_i.num_frames:
        raise ValueError(
            f"recording too short: need {offset_frames + window_frames} frames, have {p_i.num_frames}"
        )
    return PoseSequence(
        frames=p_i.frames[offset_frames : offset_frames + window_frames].copy(), fps=p_i.fps
    )


def _unpack_pair(item):
    if hasattr(item, "wearer") and hasattr(item, "interactee"):
        return item.wearer, item.interactee
    p_w, p_i = item
    return p_w, p_i
