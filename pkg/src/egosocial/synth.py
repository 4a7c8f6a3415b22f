"""Deterministic synthetic generator of paired wearer/interactee episodes.

Each episode couples two agents in a randomized room. The interactee follows
a smooth filtered random walk and occasionally raises an arm; the wearer
blends a deterministic social response (weight ``coupling``) with an
independent random walk (weight ``1 - coupling``). The social response:

* translation anticipates the interactee, tracking its position
  ``MIRROR_LAG`` frames ahead while holding a target distance that ramps
  from the random initial separation toward a room-size-dependent value
  (so the scene carries information the interactee alone does not);
* facing turns toward the interactee's current position;
* the arm mirrors the interactee's raises ``MIRROR_LAG`` frames late.

Coordinates are canonicalized so the wearer's head sits at the origin at
frame 0. Scenario presets pin the distance and gaze regimes used by the
stratified evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditioning import ScenePointCloud
from .kinematics import (
    HEAD_JOINT,
    LEFT_SHOULDER,
    RIGHT_SHOULDER,
    PoseSequence,
    default_body,
    forward_kinematics,
    pose_dim,
)

MIRROR_LAG = 10  # frames between an interactee action and the wearer's response
_FILTER_WIDTH = 5
_EXTENT_RANGE = (1.8, 4.2)  # sampled room half-extent range (meters)


@dataclass(frozen=True)
class ScenarioSpec:
    d0_range: tuple[float, float]
    d_target_range: tuple[float, float]
    interactee_facing: str  # "wearer" or "away"
    walk_std: float
    vmax: float
    facing_jitter: float
    floor_only: bool = False


SCENARIOS = {
    "face_to_face": ScenarioSpec((0.62, 0.88), (0.62, 0.88), "wearer", 0.004, 0.12, 0.0),
    "social_mid": ScenarioSpec((1.15, 1.85), (1.15, 1.85), "wearer", 0.006, 0.20, 0.0),
    "far_averted": ScenarioSpec((2.40, 3.20), (2.40, 3.20), "away", 0.006, 0.20, 0.0),
    "mixed": ScenarioSpec((0.80, 2.20), (0.55, 1.75), "wearer", 0.012, 0.50, 0.04),
    "floor_only": ScenarioSpec((0.80, 2.20), (0.55, 1.75), "wearer", 0.012, 0.50, 0.04, floor_only=True),
}


@dataclass(frozen=True)
class _Room:
    center: np.ndarray  # (2,) horizontal x/z
    half_x: float
    half_z: float
    height: float
    boxes: tuple  # (cx, cz, hx, hz, h) per furniture box


@dataclass
class InteractionEpisode:
    wearer: PoseSequence
    interactee: PoseSequence
    scene: ScenePointCloud
    seed: int
    coupling: float
    scenario: str
    floor_y: float = 0.0

    def __post_init__(self):
        if self.wearer.num_frames != self.interactee.num_frames:
            raise ValueError("wearer and interactee must share the frame count")
        if self.wearer.pose_dim != self.interactee.pose_dim:
            raise ValueError("wearer and interactee must share the pose layout")

    @property
    def num_frames(self) -> int:
        return self.wearer.num_frames


def _box_filter(x: np.ndarray, width: int = _FILTER_WIDTH) -> np.ndarray:
    kernel = np.ones(width) / width
    if x.ndim == 1:
        return np.convolve(x, kernel, mode="same")
    return np.stack([np.convolve(x[:, c], kernel, mode="same") for c in range(x.shape[1])], axis=1)


def _filtered_walk(rng: np.random.Generator, steps: int, std: float, vmax_per_frame: float, dims: int = 2) -> np.ndarray:
    """Zero-start cumulative walk with box-filtered, speed-clipped increments."""
    incr = rng.normal(0.0, std, size=(steps, dims))
    incr = _box_filter(incr)
    speed = np.linalg.norm(incr, axis=1, keepdims=True)
    scale = np.minimum(1.0, vmax_per_frame / np.maximum(speed, 1e-12))
    incr = incr * scale
    incr[0] = 0.0
    return np.cumsum(incr, axis=0)


def _arm_signal(rng: np.random.Generator, length: int) -> np.ndarray:
    """Sum of smooth raise events, clipped to a plausible joint range."""
    signal = np.zeros(length)
    t = np.arange(length, dtype=np.float64)
    for _ in range(int(rng.integers(1, 4))):
        center = rng.uniform(0, length)
        width = rng.uniform(8.0, 22.0)
        amp = rng.uniform(0.4, 1.1)
        signal += amp * np.exp(-0.5 * ((t - center) / (width / 2.355)) ** 2)
    return np.clip(signal, 0.0, 1.4)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _sample_room(spec: ScenarioSpec, rng: np.random.Generator) -> _Room:
    half_x = rng.uniform(*_EXTENT_RANGE)
    half_z = rng.uniform(*_EXTENT_RANGE)
    center = rng.uniform(-1.0, 1.0, size=2)
    height = rng.uniform(2.3, 2.8)
    boxes = []
    for _ in range(int(rng.integers(1, 4))):
        bx = rng.uniform(0.2, 0.6)
        bz = rng.uniform(0.2, 0.6)
        bh = rng.uniform(0.4, 1.0)
        cx = rng.uniform(center[0] - half_x + bx, center[0] + half_x - bx)
        cz = rng.uniform(center[1] - half_z + bz, center[1] + half_z - bz)
        boxes.append((cx, cz, bx, bz, bh))
    return _Room(center=center, half_x=half_x, half_z=half_z, height=height, boxes=tuple(boxes))


def _rect_points(rng, n, origin, edge_a, edge_b):
    """Uniform samples on the parallelogram origin + u*edge_a + v*edge_b."""
    u = rng.uniform(0.0, 1.0, size=(n, 1))
    v = rng.uniform(0.0, 1.0, size=(n, 1))
    return origin + u * edge_a + v * edge_b


def _room_surfaces(room: _Room, floor_only: bool):
    cx, cz = room.center
    hx, hz, h = room.half_x, room.half_z, room.height
    surfaces = [
        # (area, origin, edge_a, edge_b) -- floor first
        (4 * hx * hz, np.array([cx - hx, 0.0, cz - hz]), np.array([2 * hx, 0.0, 0.0]), np.array([0.0, 0.0, 2 * hz])),
    ]
    if floor_only:
        return surfaces
    walls = [
        (np.array([cx - hx, 0.0, cz - hz]), np.array([2 * hx, 0.0, 0.0]), np.array([0.0, h, 0.0])),
        (np.array([cx - hx, 0.0, cz + hz]), np.array([2 * hx, 0.0, 0.0]), np.array([0.0, h, 0.0])),
        (np.array([cx - hx, 0.0, cz - hz]), np.array([0.0, 0.0, 2 * hz]), np.array([0.0, h, 0.0])),
        (np.array([cx + hx, 0.0, cz - hz]), np.array([0.0, 0.0, 2 * hz]), np.array([0.0, h, 0.0])),
    ]
    for origin, ea, eb in walls:
        surfaces.append((float(np.linalg.norm(ea) * np.linalg.norm(eb)), origin, ea, eb))
    for bx_c, bz_c, bx, bz, bh in room.boxes:
        # top
        surfaces.append(
            (4 * bx * bz, np.array([bx_c - bx, bh, bz_c - bz]), np.array([2 * bx, 0.0, 0.0]), np.array([0.0, 0.0, 2 * bz]))
        )
        # four sides
        sides = [
            (np.array([bx_c - bx, 0.0, bz_c - bz]), np.array([2 * bx, 0.0, 0.0])),
            (np.array([bx_c - bx, 0.0, bz_c + bz]), np.array([2 * bx, 0.0, 0.0])),
            (np.array([bx_c - bx, 0.0, bz_c - bz]), np.array([0.0, 0.0, 2 * bz])),
            (np.array([bx_c + bx, 0.0, bz_c - bz]), np.array([0.0, 0.0, 2 * bz])),
        ]
        for origin, ea in sides:
            surfaces.append((float(np.linalg.norm(ea) * bh), origin, ea, np.array([0.0, bh, 0.0])))
    return surfaces


def _room_pointcloud(room: _Room, n_points: int, rng: np.random.Generator, floor_only: bool) -> np.ndarray:
    surfaces = _room_surfaces(room, floor_only)
    areas = np.array([s[0] for s in surfaces])
    counts = rng.multinomial(n_points, areas / areas.sum())
    chunks = [
        _rect_points(rng, int(c), origin, ea, eb)
        for c, (_, origin, ea, eb) in zip(counts, surfaces)
        if c > 0
    ]
    return np.concatenate(chunks, axis=0)


def generate_scene_pointcloud(scenario: str, n_points: int, seed: int) -> ScenePointCloud:
    """Stand-alone scene cloud for a scenario's room style (floor at y = 0)."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r} (choose from {sorted(SCENARIOS)})")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    spec = SCENARIOS[scenario]
    rng_room, rng_pts = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    room = _sample_room(spec, rng_room)
    pts = _room_pointcloud(room, n_points, rng_pts, spec.floor_only)
    return ScenePointCloud(points=pts.astype(np.float32))


def generate_interaction_episode(
    scenario: str,
    num_frames: int,
    coupling: float,
    seed: int,
    fps: float = 30.0,
    scene_points: int = 1024,
    joints: int = 24,
) -> InteractionEpisode:
    """One deterministic episode; same arguments give a bit-identical result."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r} (choose from {sorted(SCENARIOS)})")
    if not 0.0 <= coupling <= 1.0:
        raise ValueError("coupling must lie in [0, 1]")
    if num_frames < 3:
        raise ValueError("need at least 3 frames")
    spec = SCENARIOS[scenario]
    lag = MIRROR_LAG
    f = num_frames
    ss = np.random.SeedSequence(seed)
    rng_room, rng_int, rng_wearer, rng_scene = [np.random.default_rng(s) for s in ss.spawn(4)]

    room = _sample_room(spec, rng_room)
    extent = (room.half_x + room.half_z) / 2.0
    frac = (extent - _EXTENT_RANGE[0]) / (_EXTENT_RANGE[1] - _EXTENT_RANGE[0])
    d_lo, d_hi = spec.d_target_range
    d_target = d_lo + (d_hi - d_lo) * float(np.clip(frac, 0.0, 1.0))

    yaw0 = rng_int.uniform(-np.pi, np.pi)
    d0 = rng_int.uniform(*spec.d0_range)
    h_w = rng_int.uniform(0.90, 0.98)
    h_i = rng_int.uniform(0.90, 0.98)
    facing0 = np.array([np.sin(yaw0), np.cos(yaw0)])  # horizontal (x, z)

    # Interactee: walk simulated `lag` frames past the window for anticipation.
    int0 = d0 * facing0
    int_xz = int0 + _filtered_walk(rng_int, f + lag, spec.walk_std, spec.vmax / fps)
    arm_full = _arm_signal(rng_int, f + lag)  # index i is time i - lag
    arm_int = arm_full[lag:]

    # Wearer social response.
    u0 = -facing0  # interactee -> wearer side, fixed per episode
    ramp = _smoothstep(np.arange(f, dtype=np.float64) / max(0.6 * f, 1.0))
    dist = d0 + (d_target - d0) * ramp
    pos_w_soc = int_xz[lag : lag + f] + dist[:, None] * u0
    to_int_now = int_xz[:f] - pos_w_soc
    yaw_soc = np.unwrap(np.arctan2(to_int_now[:, 0], to_int_now[:, 1]))
    yaw_soc += round((yaw0 - yaw_soc[0]) / (2 * np.pi)) * 2 * np.pi
    arm_w_soc = arm_full[:f]  # = interactee's raise, `lag` frames late

    # Wearer independent component.
    pos_w_ind = pos_w_soc[0] + _filtered_walk(rng_wearer, f, spec.walk_std, spec.vmax / fps)
    yaw_ind = yaw0 + _filtered_walk(rng_wearer, f, 0.02, 0.2, dims=1)[:, 0]
    arm_ind = np.clip(_filtered_walk(rng_wearer, f, 0.03, 1.0, dims=1)[:, 0], 0.0, 1.4)

    k = coupling
    pos_w = k * pos_w_soc + (1.0 - k) * pos_w_ind
    yaw_w = k * yaw_soc + (1.0 - k) * yaw_ind
    arm_w = k * arm_w_soc + (1.0 - k) * arm_ind

    # Interactee facing, from the wearer's realized positions.
    rel = pos_w - int_xz[:f]
    yaw_to_wearer = np.unwrap(np.arctan2(rel[:, 0], rel[:, 1]))
    if spec.interactee_facing == "away":
        yaw_i = yaw_to_wearer + np.pi
    else:
        yaw_i = yaw_to_wearer
    if spec.facing_jitter > 0:
        yaw_i = yaw_i + _box_filter(rng_int.normal(0.0, spec.facing_jitter, f))

    v = pose_dim(joints)
    wearer = np.zeros((f, v), dtype=np.float64)
    interactee = np.zeros((f, v), dtype=np.float64)
    wearer[:, 1] = yaw_w
    interactee[:, 1] = yaw_i
    # Arm raise: interactee's left shoulder, wearer's mirrored right shoulder.
    interactee[:, 3 * LEFT_SHOULDER + 2] = arm_int
    wearer[:, 3 * RIGHT_SHOULDER + 2] = -arm_w
    wearer[:, -3] = pos_w[:, 0]
    wearer[:, -2] = h_w
    wearer[:, -1] = pos_w[:, 1]
    interactee[:, -3] = int_xz[:f, 0]
    interactee[:, -2] = h_i
    interactee[:, -1] = int_xz[:f, 1]

    scene_xyz = _room_pointcloud(room, scene_points, rng_scene, spec.floor_only)

    # Canonicalize: wearer head at frame 0 becomes the origin.
    body = default_body()
    head0 = forward_kinematics(wearer[0], body)[HEAD_JOINT]
    wearer[:, -3:] -= head0
    interactee[:, -3:] -= head0
    scene_xyz = scene_xyz - head0

    return InteractionEpisode(
        wearer=PoseSequence(frames=wearer.astype(np.float32), fps=fps),
        interactee=PoseSequence(frames=interactee.astype(np.float32), fps=fps),
        scene=ScenePointCloud(points=scene_xyz.astype(np.float32)),
        seed=seed,
        coupling=coupling,
        scenario=scenario,
        floor_y=float(np.float32(-head0[1])),
    )


def generate_dataset(
    scenario: str,
    num_episodes: int,
    num_frames: int,
    coupling: float,
    master_seed: int,
    fps: float = 30.0,
    scene_points: int = 1024,
) -> list[InteractionEpisode]:
    """Episodes with per-episode seeds split off the master seed."""
    if num_episodes < 1:
        raise ValueError("need at least one episode")
    seeds = np.random.SeedSequence(master_seed).generate_state(num_episodes)
    return [
        generate_interaction_episode(
            scenario, num_frames, coupling, int(s), fps=fps, scene_points=scene_points
        )
        for s in seeds
    ]
