"""Model checkpoints: text header + little-endian float32 parameter blob.

Same container family as the dataset format. The header records the model
kind, the config snapshot, the seed, a format version and a SHA-256 of the
payload, which is verified on load.
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np
import torch

from .config import ExperimentConfig, parse_config_text
from .errors import (
    CheckpointHashError,
    CheckpointVersionError,
    DimensionMismatchError,
    HeaderError,
    TruncatedPayloadError,
)

MAGIC = "egosocial-checkpoint"
VERSION = 1
KINDS = ("vae", "denoiser", "scene_encoder")
_HEADER_END = "---"


def save_checkpoint(module: torch.nn.Module, kind: str, config: ExperimentConfig, seed: int, path,
                    version_string: str = "") -> None:
    """Write the module state_dict (parameters and buffers) as float32."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    state = module.state_dict()
    payload = io.BytesIO()
    tensor_lines = []
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        tensor_lines.append(f"tensor: {name} {shape}")
        payload.write(arr.tobytes())
    blob = payload.getvalue()
    digest = hashlib.sha256(blob).hexdigest()

    buf = io.BytesIO()
    buf.write(f"format: {MAGIC}\n".encode())
    buf.write(f"version: {VERSION}\n".encode())
    buf.write(f"kind: {kind}\n".encode())
    buf.write(f"seed: {seed}\n".encode())
    buf.write(f"sha256: {digest}\n".encode())
    if version_string:
        buf.write(f"version_string: {version_string}\n".encode())
    for line in tensor_lines:
        buf.write((line + "\n").encode())
    buf.write(b"config_begin\n")
    buf.write(config.to_text().encode())
    buf.write(b"config_end\n")
    buf.write(f"{_HEADER_END}\n".encode())
    buf.write(blob)
    Path(path).write_bytes(buf.getvalue())


def _parse(raw: bytes):
    end_marker = f"{_HEADER_END}\n".encode()
    pos = raw.find(b"\n" + end_marker)
    if pos < 0:
        raise HeaderError("missing header terminator")
    try:
        text = raw[: pos + 1].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise HeaderError(f"header is not valid UTF-8: {exc}") from exc
    payload = raw[pos + 1 + len(end_marker):]

    fields = {}
    tensors = []
    config_lines = []
    in_config = False
    for line in text.splitlines():
        if line == "config_begin":
            in_config = True
            continue
        if line == "config_end":
            in_config = False
            continue
        if in_config:
            config_lines.append(line)
            continue
        if not line.strip():
            continue
        if ":" not in line:
            raise HeaderError(f"malformed header line: {line!r}")
        key, value = line.split(":", 1)
        key, value = key.strip(), value.strip()
        if key == "tensor":
            parts = value.rsplit(" ", 1)
            if len(parts) != 2:
                raise HeaderError(f"malformed tensor line: {value!r}")
            name, shape_text = parts
            shape = () if shape_text == "scalar" else tuple(int(d) for d in shape_text.split("x"))
            tensors.append((name, shape))
        else:
            fields[key] = value
    return fields, tensors, "\n".join(config_lines), payload


def load_checkpoint(path, expected_kind: str | None = None):
    """Return (kind, state_dict of float32 tensors, config, seed, header fields).

    Raises :class:`CheckpointHashError` on payload corruption and
    :class:`CheckpointVersionError` on version skew.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint {p} does not exist")
    fields, tensors, config_text, payload = _parse(p.read_bytes())
    if fields.get("format") != MAGIC:
        raise HeaderError(f"not a {MAGIC} file (format={fields.get('format')!r})")
    try:
        version = int(fields["version"])
    except (KeyError, ValueError) as exc:
        raise HeaderError(f"bad version field: {exc}") from exc
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, supported {VERSION}")
    kind = fields.get("kind")
    if kind not in KINDS:
        raise HeaderError(f"unknown checkpoint kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise HeaderError(f"expected a {expected_kind} checkpoint, found {kind}")

    expected_bytes = sum(int(np.prod(shape, dtype=np.int64)) if shape else 1 for _, shape in tensors) * 4
    if len(payload) < expected_bytes:
        raise TruncatedPayloadError(f"payload holds {len(payload)} bytes, header declares {expected_bytes}")
    if len(payload) > expected_bytes:
        raise DimensionMismatchError(
            f"payload holds {len(payload)} bytes but tensor shapes imply {expected_bytes}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != fields.get("sha256"):
        raise CheckpointHashError("payload hash does not match the header")

    state = {}
    offset = 0
    for name, shape in tensors:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).copy()
        state[name] = torch.from_numpy(arr)
        offset += count * 4
    config = parse_config_text(config_text)
    seed = int(fields.get("seed", "0"))
    return kind, state, config, seed, fields


def load_vae(path):
    """Rebuild a VAE from its checkpoint; returns (model, config, seed)."""
    from .vae import VaeModel

    _, state, config, seed, _ = load_checkpoint(path, expected_kind="vae")
    model = VaeModel(
        num_frames=config.frames, pose_dim=config.pose_dim, latent_dim=config.latent_dim,
        layers=config.layers, heads=config.heads, ff_mult=config.ff_mult,
    )
    model.load_state_dict(state)
    model.eval()
    model.requires_grad_(False)
    return model, config, seed


def load_denoiser(path):
    """Rebuild a denoiser (including its latent standardization buffers)."""
    from .diffusion import DenoiserModel

    _, state, config, seed, _ = load_checkpoint(path, expected_kind="denoiser")
    model = DenoiserModel(config.latent_dim, config.layers, config.heads, ff_mult=config.ff_mult)
    model.load_state_dict(state)
    model.eval()
    model.requires_grad_(False)
    return model, config, seed


def load_scene_encoder(path):
    from .conditioning import SceneEncoder

    _, state, config, seed, _ = load_checkpoint(path, expected_kind="scene_encoder")
    model = SceneEncoder(config.latent_dim)
    model.load_state_dict(state)
    model.eval()
    model.requires_grad_(False)
    return model, config, seed
