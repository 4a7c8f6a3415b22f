"""Conditioning tokens: frozen-VAE interactee embedding plus scene embedding.

The scene encoder is a per-point MLP followed by a max pool and a projection
to the latent width, which makes it permutation invariant by construction.
Tokens are concatenated in a fixed [interactee, scene] order and consumed by
the denoiser through cross-attention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .kinematics import PoseSequence
from .vae import VaeModel, encode


@dataclass
class ScenePointCloud:
    """N x 3 points (meters) in the wearer-camera-origin frame."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty N x 3 array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.points = pts

    @property
    def num_points(self) -> int:
        return int(self.points.shape[0])


class SceneEncoder(nn.Module):
    """Per-point MLP -> max pool -> projection to the latent width."""

    def __init__(self, latent_dim: int, widths: tuple[int, ...] = (64, 128, 256),
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.latent_dim = latent_dim
        layers = []
        prev = 3
        for w in widths:
            layers += [nn.Linear(prev, w, dtype=dtype), nn.ReLU()]
            prev = w
        self.point_mlp = nn.Sequential(*layers)
        self.proj = nn.Linear(prev, latent_dim, dtype=dtype)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        if points.ndim == 2:
            points = points.unsqueeze(0)
        feats = self.point_mlp(points)
        pooled = feats.max(dim=1).values
        return self.proj(pooled)


def build_scene_encoder(latent_dim: int, seed: int, widths: tuple[int, ...] = (64, 128, 256)) -> SceneEncoder:
    """Seeded construction; by default the encoder stays at this init and frozen."""
    torch.manual_seed(seed)
    return SceneEncoder(latent_dim, widths=widths)


def subsample_pointcloud(cloud: ScenePointCloud, n_target: int, seed: int) -> ScenePointCloud:
    """Fixed-size cloud: choice without replacement, or pad with replacement."""
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    rng = np.random.default_rng(seed)
    n = cloud.num_points
    if n >= n_target:
        idx = rng.choice(n, size=n_target, replace=False)
    else:
        extra = rng.choice(n, size=n_target - n, replace=True)
        idx = np.concatenate([np.arange(n), extra])
    return ScenePointCloud(points=cloud.points[idx])


def encode_scene(cloud: ScenePointCloud, enc: SceneEncoder) -> torch.Tensor:
    """D-wide scene token; exactly invariant to point order and duplication."""
    pts = torch.from_numpy(cloud.points).to(next(enc.parameters()).dtype)
    with torch.no_grad():
        return enc(pts)[0]


def encode_interactee(p_i: PoseSequence, vae: VaeModel) -> torch.Tensor:
    """Posterior mean of the interactee window under the frozen VAE encoder."""
    return encode(p_i, vae).mu[0].detach()


def perturb_interactee(p_i: PoseSequence, sigma: float, seed: int) -> PoseSequence:
    """Gaussian noise on the axis-angle channels, emulating estimator error.

    Translation is left untouched; sigma is in radians.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return PoseSequence(frames=p_i.frames.copy(), fps=p_i.fps)
    rng = np.random.default_rng(seed)
    frames = p_i.frames.copy()
    frames[:, :-3] += rng.normal(0.0, sigma, size=frames[:, :-3].shape).astype(np.float32)
    return PoseSequence(frames=frames, fps=p_i.fps)


@dataclass
class ConditionBundle:
    """K x D conditioning tokens in fixed [interactee, scene] order."""

    tokens: torch.Tensor
    has_interactee: bool
    has_scene: bool

    def __post_init__(self):
        expected = int(self.has_interactee) + int(self.has_scene)
        if self.tokens.ndim != 2 or self.tokens.shape[0] != expected:
            raise ValueError(
                f"token count {tuple(self.tokens.shape)} does not match flags "
                f"(interactee={self.has_interactee}, scene={self.has_scene})"
            )

    @property
    def num_tokens(self) -> int:
        return int(self.tokens.shape[0])


def build_condition_bundle(interactee_token: torch.Tensor | None = None,
                           scene_token: torch.Tensor | None = None) -> ConditionBundle:
    """Concatenate whichever tokens are present; K = 0 means unconditional."""
    present = [t for t in (interactee_token, scene_token) if t is not None]
    widths = {int(t.shape[-1]) for t in present}
    if len(widths) > 1:
        raise ValueError(f"token width mismatch: {sorted(widths)}")
    width = widths.pop() if widths else 0
    tokens = (
        torch.stack([t.reshape(-1) for t in present])
        if present
        else torch.zeros((0, width))
    )
    return ConditionBundle(
        tokens=tokens,
        has_interactee=interactee_token is not None,
        has_scene=scene_token is not None,
    )


def bundles_to_batch(bundles: list[ConditionBundle]) -> torch.Tensor | None:
    """Stack per-item bundles into (B, K, D); None when unconditional."""
    if not bundles:
        raise ValueError("bundle list must be non-empty")
    k = bundles[0].num_tokens
    if any(b.num_tokens != k for b in bundles):
        raise ValueError("all bundles must have the same token count")
    if k == 0:
        return None
    return torch.stack([b.tokens for b in bundles])
