"""Experiment configuration: one flat record driving every pipeline stage.

Shipped defaults follow the reference training recipe (latent width 256,
9 layers, 4 heads, AdamW at 1e-4, batches 64/128, 1000 diffusion steps with
20 at inference); every field can be overridden from a ``key: value`` config
file or command-line flags. A snapshot is embedded in every artifact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class ExperimentConfig:
    # model
    latent_dim: int = 256
    layers: int = 9
    heads: int = 4
    ff_mult: int = 4
    # diffusion
    timesteps: int = 1000
    steps_inference: int = 20
    beta_start: float = 1e-4
    beta_end: float = 0.02
    z0_from_mean: bool = True
    # training
    lr_vae: float = 1e-4
    lr_denoiser: float = 1e-4
    batch_vae: int = 64
    batch_denoiser: int = 128
    vae_steps: int = 2000
    denoiser_steps: int = 2000
    kl_weight: float = 1e-4
    lambda_fk: float = 1.0
    scene_encoder_warmup_steps: int = 0
    # conditioning
    cond_interactee: bool = True
    cond_scene: bool = True
    scene_points: int = 1024
    interactee_noise_sigma: float = 0.0
    condition_on_future: bool = False
    future_offset: int = 30
    # data
    joints: int = 24
    frames: int = 60
    fps: float = 30.0
    episodes: int = 250
    train_episodes: int = 200
    scenario: str = "mixed"
    coupling: float = 0.9
    future_margin: int = 0
    # evaluation
    samples_per_input: int = 1
    eval_seed: int = 0
    # global
    seed: int = 0

    @property
    def pose_dim(self) -> int:
        return 3 * self.joints + 3

    def validate(self) -> None:
        """Collect every violated field and raise once."""
        bad = []
        pos_ints = [
            "latent_dim", "layers", "heads", "ff_mult", "timesteps", "steps_inference",
            "batch_vae", "batch_denoiser", "vae_steps", "denoiser_steps", "scene_points",
            "joints", "frames", "episodes", "train_episodes", "samples_per_input",
        ]
        for name in pos_ints:
            if getattr(self, name) < 1:
                bad.append(f"{name} must be >= 1 (got {getattr(self, name)})")
        for name in ("lr_vae", "lr_denoiser", "fps"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be > 0 (got {getattr(self, name)})")
        for name in ("kl_weight", "lambda_fk", "interactee_noise_sigma"):
            if getattr(self, name) < 0:
                bad.append(f"{name} must be >= 0 (got {getattr(self, name)})")
        if not 0.0 < self.beta_start <= self.beta_end < 1.0:
            bad.append(f"need 0 < beta_start <= beta_end < 1 (got {self.beta_start}, {self.beta_end})")
        if self.steps_inference > self.timesteps:
            bad.append(f"steps_inference {self.steps_inference} exceeds timesteps {self.timesteps}")
        if not 0.0 <= self.coupling <= 1.0:
            bad.append(f"coupling must lie in [0, 1] (got {self.coupling})")
        if self.latent_dim % self.heads != 0:
            bad.append(f"latent_dim {self.latent_dim} must be divisible by heads {self.heads}")
        if self.train_episodes > self.episodes:
            bad.append(f"train_episodes {self.train_episodes} exceeds episodes {self.episodes}")
        if self.future_offset < 0 or self.future_margin < 0 or self.scene_encoder_warmup_steps < 0:
            bad.append("future_offset, future_margin and scene_encoder_warmup_steps must be >= 0")
        if self.condition_on_future and self.future_offset > self.future_margin:
            bad.append(
                f"condition_on_future needs future_margin >= future_offset "
                f"(got margin {self.future_margin}, offset {self.future_offset})"
            )
        if bad:
            raise ConfigError(bad)

    def to_text(self) -> str:
        lines = []
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{field.name}: {value}")
        return "\n".join(lines) + "\n"

    def replace(self, **kwargs) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw.strip()


def _field_map():
    return {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def config_from_pairs(pairs: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply string key/value overrides on top of ``base`` (or the defaults)."""
    fields = _field_map()
    cfg = base if base is not None else ExperimentConfig()
    errors = []
    updates = {}
    for key, raw in pairs.items():
        if key not in fields:
            errors.append(f"unknown config key {key!r}")
            continue
        try:
            updates[key] = _coerce(fields[key], raw)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg.replace(**updates)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a ``key: value`` config file (blank lines and # comments ignored)."""
    pairs = {}
    errors = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            errors.append(f"line {lineno}: expected 'key: value', got {stripped!r}")
            continue
        key, value = stripped.split(":", 1)
        pairs[key.strip()] = value.strip()
    if errors:
        raise ConfigError(errors)
    return config_from_pairs(pairs, base=base)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Same as :func:`load_config` but from an in-memory string (checkpoint snapshots)."""
    pairs = {}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, value = stripped.split(":", 1)
        pairs[key.strip()] = value.strip()
    return config_from_pairs(pairs, base=base)
