"""On-disk dataset format: a text header plus raw little-endian float32 blocks.

Header lines are ``key: value`` UTF-8, terminated by a ``---`` line; the
payload holds, per episode and in order: wearer F x V, interactee F x V,
scene N x 3. The format is deliberately trivial to parse from any language
and round-trips bit-exactly.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .conditioning import ScenePointCloud
from .errors import DimensionMismatchError, HeaderError, TruncatedPayloadError
from .kinematics import PoseSequence
from .synth import InteractionEpisode

MAGIC = "egosocial-dataset"
VERSION = 1
_HEADER_END = "---"


def _format_floats(values) -> str:
    return ",".join(repr(float(np.float32(v))) for v in values)


def write_dataset(episodes: list[InteractionEpisode], path, extra_header: dict | None = None) -> None:
    """Serialize episodes; ``extra_header`` adds free-form provenance lines."""
    if not episodes:
        raise ValueError("cannot write an empty dataset")
    first = episodes[0]
    f, v = first.wearer.num_frames, first.wearer.pose_dim
    n = first.scene.num_points
    for ep in episodes:
        if ep.wearer.num_frames != f or ep.wearer.pose_dim != v or ep.scene.num_points != n:
            raise ValueError("episodes must share frames, pose width and scene size")
    joints = (v - 3) // 3
    lines = {
        "format": MAGIC,
        "version": str(VERSION),
        "episodes": str(len(episodes)),
        "frames": str(f),
        "pose_dim": str(v),
        "joints": str(joints),
        "scene_points": str(n),
        "fps": repr(float(first.wearer.fps)),
        "endianness": "little",
        "dtype": "float32",
        "episode_seeds": ",".join(str(ep.seed) for ep in episodes),
        "episode_scenarios": ",".join(ep.scenario for ep in episodes),
        "episode_couplings": _format_floats(ep.coupling for ep in episodes),
        "episode_floor_y": _format_floats(ep.floor_y for ep in episodes),
    }
    if extra_header:
        for key, value in extra_header.items():
            if key in lines:
                raise ValueError(f"extra header key {key!r} collides with a reserved key")
            lines[key] = str(value)
    buf = io.BytesIO()
    for key, value in lines.items():
        buf.write(f"{key}: {value}\n".encode())
    buf.write(f"{_HEADER_END}\n".encode())
    for ep in episodes:
        buf.write(ep.wearer.frames.astype("<f4").tobytes())
        buf.write(ep.interactee.frames.astype("<f4").tobytes())
        buf.write(ep.scene.points.astype("<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def _parse_header(raw: bytes):
    end_marker = f"{_HEADER_END}\n".encode()
    pos = raw.find(b"\n" + end_marker)
    if pos < 0:
        raise HeaderError("missing header terminator")
    header_bytes, payload = raw[: pos + 1], raw[pos + 1 + len(end_marker):]
    header = {}
    try:
        text = header_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise HeaderError(f"header is not valid UTF-8: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if ":" not in line:
            raise HeaderError(f"malformed header line {lineno}: {line!r}")
        key, value = line.split(":", 1)
        header[key.strip()] = value.strip()
    return header, payload


def _require(header: dict, key: str) -> str:
    if key not in header:
        raise HeaderError(f"missing header key {key!r}")
    return header[key]


def read_dataset(path) -> list[InteractionEpisode]:
    """Parse a dataset file; failures raise typed errors, never crash mid-array."""
    raw = Path(path).read_bytes()
    header, payload = _parse_header(raw)
    if _require(header, "format") != MAGIC:
        raise HeaderError(f"not a {MAGIC} file (format={header['format']!r})")
    try:
        version = int(_require(header, "version"))
        episodes = int(_require(header, "episodes"))
        frames = int(_require(header, "frames"))
        pose_width = int(_require(header, "pose_dim"))
        joints = int(_require(header, "joints"))
        scene_points = int(_require(header, "scene_points"))
        fps = float(_require(header, "fps"))
    except ValueError as exc:
        raise HeaderError(f"non-numeric header field: {exc}") from exc
    if version != VERSION:
        raise HeaderError(f"unsupported dataset version {version}")
    if episodes < 1 or frames < 1 or scene_points < 1:
        raise HeaderError("episodes, frames and scene_points must be positive")
    if pose_width != 3 * joints + 3:
        raise DimensionMismatchError(
            f"pose_dim {pose_width} does not match joints {joints} (expected {3 * joints + 3})"
        )
    seeds = _split_ints(_require(header, "episode_seeds"), episodes, "episode_seeds")
    scenarios = _require(header, "episode_scenarios").split(",")
    couplings = _split_floats(_require(header, "episode_couplings"), episodes, "episode_couplings")
    floor_ys = _split_floats(_require(header, "episode_floor_y"), episodes, "episode_floor_y")
    if len(scenarios) != episodes:
        raise HeaderError("episode_scenarios length does not match episode count")

    per_episode = (2 * frames * pose_width + scene_points * 3) * 4
    expected = per_episode * episodes
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"payload holds {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise DimensionMismatchError(
            f"payload holds {len(payload)} bytes but header dimensions imply {expected}"
        )

    out = []
    offset = 0
    pose_bytes = frames * pose_width * 4
    scene_bytes = scene_points * 3 * 4
    for i in range(episodes):
        wearer = np.frombuffer(payload, dtype="<f4", count=frames * pose_width, offset=offset)
        offset += pose_bytes
        interactee = np.frombuffer(payload, dtype="<f4", count=frames * pose_width, offset=offset)
        offset += pose_bytes
        scene = np.frombuffer(payload, dtype="<f4", count=scene_points * 3, offset=offset)
        offset += scene_bytes
        out.append(
            InteractionEpisode(
                wearer=PoseSequence(frames=wearer.reshape(frames, pose_width).copy(), fps=fps),
                interactee=PoseSequence(frames=interactee.reshape(frames, pose_width).copy(), fps=fps),
                scene=ScenePointCloud(points=scene.reshape(scene_points, 3).copy()),
                seed=seeds[i],
                coupling=couplings[i],
                scenario=scenarios[i],
                floor_y=floor_ys[i],
            )
        )
    return out


def read_header(path) -> dict:
    """Header key/value pairs only (cheap provenance inspection)."""
    header, _ = _parse_header(Path(path).read_bytes())
    return header


POSES_MAGIC = "egosocial-poses"


def write_poses(sequences: list[PoseSequence], path, extra_header: dict | None = None) -> None:
    """Serialize generated pose sequences (same container family as datasets)."""
    if not sequences:
        raise ValueError("cannot write an empty pose file")
    f, v = sequences[0].num_frames, sequences[0].pose_dim
    for seq in sequences:
        if seq.num_frames != f or seq.pose_dim != v:
            raise ValueError("sequences must share frames and pose width")
    lines = {
        "format": POSES_MAGIC,
        "version": str(VERSION),
        "sequences": str(len(sequences)),
        "frames": str(f),
        "pose_dim": str(v),
        "fps": repr(float(sequences[0].fps)),
        "endianness": "little",
        "dtype": "float32",
    }
    if extra_header:
        lines.update({k: str(v) for k, v in extra_header.items()})
    buf = io.BytesIO()
    for key, value in lines.items():
        buf.write(f"{key}: {value}\n".encode())
    buf.write(f"{_HEADER_END}\n".encode())
    for seq in sequences:
        buf.write(seq.frames.astype("<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_poses(path) -> list[PoseSequence]:
    raw = Path(path).read_bytes()
    header, payload = _parse_header(raw)
    if _require(header, "format") != POSES_MAGIC:
        raise HeaderError(f"not a {POSES_MAGIC} file (format={header['format']!r})")
    try:
        count = int(_require(header, "sequences"))
        frames = int(_require(header, "frames"))
        pose_width = int(_require(header, "pose_dim"))
        fps = float(_require(header, "fps"))
    except ValueError as exc:
        raise HeaderError(f"non-numeric header field: {exc}") from exc
    expected = count * frames * pose_width * 4
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload holds {len(payload)} bytes, header declares {expected}")
    if len(payload) > expected:
        raise DimensionMismatchError(f"payload holds {len(payload)} bytes but header implies {expected}")
    out = []
    stride = frames * pose_width
    for i in range(count):
        arr = np.frombuffer(payload, dtype="<f4", count=stride, offset=i * stride * 4)
        out.append(PoseSequence(frames=arr.reshape(frames, pose_width).copy(), fps=fps))
    return out


def _split_ints(text: str, expected: int, name: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise HeaderError(f"bad {name}: {exc}") from exc
    if len(values) != expected:
        raise HeaderError(f"{name} length {len(values)} does not match episode count {expected}")
    return values


def _split_floats(text: str, expected: int, name: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise HeaderError(f"bad {name}: {exc}") from exc
    if len(values) != expected:
        raise HeaderError(f"{name} length {len(values)} does not match episode count {expected}")
    return values
