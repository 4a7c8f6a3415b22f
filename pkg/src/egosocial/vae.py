"""Sequence VAE over pose windows.

The encoder is a transformer over embedded frames with two learned readout
tokens producing the posterior mean and log-variance of a single D-wide
latent. The decoder cross-attends f* zero-initialized query tokens (plus
positional encoding) against that latent and projects back to pose vectors.
The same frozen encoder later embeds the interactee as a conditioning token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .fk_torch import forward_kinematics_torch
from .kinematics import BodyModel, PoseSequence


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian over the latent: per-dimension mean and standard deviation."""

    mu: torch.Tensor
    sigma: torch.Tensor

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must share a shape")
        if not bool(torch.all(self.sigma > 0)):
            raise ValueError("sigma must be strictly positive")


def sinusoidal_positions(length: int, dim: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Standard fixed sin/cos positional table, computed for any length on demand."""
    position = torch.arange(length, dtype=torch.float64, device=device).unsqueeze(1)
    half = (dim + 1) // 2
    freq = torch.exp(torch.arange(half, dtype=torch.float64, device=device) * (-math.log(10000.0) / max(half - 1, 1)))
    args = position * freq
    table = torch.zeros(length, dim, dtype=torch.float64, device=device)
    table[:, 0::2] = torch.sin(args)[:, : table[:, 0::2].shape[1]]
    table[:, 1::2] = torch.cos(args)[:, : table[:, 1::2].shape[1]]
    return table.to(dtype)


class VaeModel(nn.Module):
    """Transformer encoder/decoder pair with a single D-dimensional latent token."""

    def __init__(
        self,
        num_frames: int,
        pose_dim: int,
        latent_dim: int = 256,
        layers: int = 9,
        heads: int = 4,
        ff_mult: int = 4,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.num_frames = num_frames
        self.pose_dim = pose_dim
        self.latent_dim = latent_dim
        d = latent_dim
        self.input_proj = nn.Linear(pose_dim, d, dtype=dtype)
        # Readout slots: position 0 -> mu, position 1 -> log-variance.
        self.dist_tokens = nn.Parameter(torch.zeros(2, d, dtype=dtype))
        nn.init.normal_(self.dist_tokens, std=0.02)
        enc_layer = nn.TransformerEncoderLayer(
            d_model=d, nhead=heads, dim_feedforward=ff_mult * d, batch_first=True,
            dropout=0.0, norm_first=True, dtype=dtype,
        )
        self.encoder = nn.TransformerEncoder(enc_layer, num_layers=layers)
        dec_layer = nn.TransformerDecoderLayer(
            d_model=d, nhead=heads, dim_feedforward=ff_mult * d, batch_first=True,
            dropout=0.0, norm_first=True, dtype=dtype,
        )
        self.decoder = nn.TransformerDecoder(dec_layer, num_layers=layers)
        self.output_proj = nn.Linear(d, pose_dim, dtype=dtype)
        # Start the posterior narrow so early reconstruction is not noise-dominated.
        self.logvar_bias = nn.Parameter(torch.full((d,), -4.0, dtype=dtype))
        # Per-channel pose standardization, fit from the training set (identity by default).
        self.register_buffer("pose_mean", torch.zeros(pose_dim, dtype=dtype))
        self.register_buffer("pose_std", torch.ones(pose_dim, dtype=dtype))
        self._dtype = dtype

    def set_pose_stats(self, frames: torch.Tensor) -> None:
        """Fit the per-channel normalization from an (N, F, V) training stack."""
        flat = frames.reshape(-1, self.pose_dim)
        self.pose_mean.copy_(flat.mean(dim=0))
        self.pose_std.copy_(flat.std(dim=0).clamp(min=1e-2))

    def encode(self, frames: torch.Tensor) -> GaussianPosterior:
        """Posterior for a (B, F, V) batch; sigma = exp(0.5 * logvar) so it is > 0."""
        if frames.ndim != 3 or frames.shape[1] != self.num_frames or frames.shape[2] != self.pose_dim:
            raise ValueError(
                f"expected (B, {self.num_frames}, {self.pose_dim}) input, got {tuple(frames.shape)}"
            )
        b = frames.shape[0]
        x = self.input_proj((frames - self.pose_mean) / self.pose_std)
        x = x + sinusoidal_positions(self.num_frames, self.latent_dim, dtype=x.dtype, device=x.device)
        tokens = self.dist_tokens.unsqueeze(0).expand(b, -1, -1)
        out = self.encoder(torch.cat([tokens, x], dim=1))
        mu = out[:, 0]
        logvar = out[:, 1] + self.logvar_bias
        return GaussianPosterior(mu=mu, sigma=torch.exp(0.5 * logvar))

    def decode(self, z: torch.Tensor, f_star: int) -> torch.Tensor:
        """Decode a (B, D) latent into (B, f_star, V) poses via zero query tokens."""
        if f_star < 1:
            raise ValueError("f_star must be >= 1")
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ValueError(f"expected (B, {self.latent_dim}) latent, got {tuple(z.shape)}")
        queries = sinusoidal_positions(f_star, self.latent_dim, dtype=z.dtype, device=z.device)
        queries = queries.unsqueeze(0).expand(z.shape[0], -1, -1)
        out = self.decoder(tgt=queries, memory=z.unsqueeze(1))
        return self.output_proj(out) * self.pose_std + self.pose_mean


def build_vae(num_frames, pose_dim, latent_dim, layers, heads, seed: int, ff_mult: int = 4,
              dtype: torch.dtype = torch.float32) -> VaeModel:
    """Construct a VAE with deterministic, seed-controlled initialization."""
    torch.manual_seed(seed)
    return VaeModel(num_frames, pose_dim, latent_dim, layers, heads, ff_mult=ff_mult, dtype=dtype)


def _as_batch(p) -> torch.Tensor:
    if isinstance(p, PoseSequence):
        return torch.from_numpy(p.frames).unsqueeze(0)
    t = torch.as_tensor(p)
    if t.ndim == 2:
        t = t.unsqueeze(0)
    return t


def encode(p, model: VaeModel) -> GaussianPosterior:
    """Posterior for a single sequence (or batch); no gradients retained."""
    frames = _as_batch(p).to(next(model.parameters()).dtype)
    with torch.no_grad():
        return model.encode(frames)


def reparameterize(post: GaussianPosterior, rho: torch.Tensor) -> torch.Tensor:
    """z = mu + sigma * rho with rho ~ N(0, I)."""
    rho = torch.as_tensor(rho, dtype=post.mu.dtype, device=post.mu.device)
    if rho.shape != post.mu.shape:
        raise ValueError(f"rho shape {tuple(rho.shape)} must match mu {tuple(post.mu.shape)}")
    return post.mu + post.sigma * rho


def decode(z, f_star: int, model: VaeModel, fps: float = 30.0) -> PoseSequence:
    """Decode one latent into a PoseSequence of exactly f_star frames."""
    zt = torch.as_tensor(z, dtype=next(model.parameters()).dtype)
    if zt.ndim == 1:
        zt = zt.unsqueeze(0)
    with torch.no_grad():
        frames = model.decode(zt, f_star)[0]
    return PoseSequence(frames=frames.cpu().numpy().astype(np.float32), fps=fps)


def kl_standard_normal(post: GaussianPosterior) -> torch.Tensor:
    """KL(N(mu, sigma^2 I) || N(0, I)) per batch element, closed form."""
    var = post.sigma * post.sigma
    return 0.5 * (post.mu * post.mu + var - 1.0 - torch.log(var)).sum(dim=-1)


def elbo_loss(
    p: torch.Tensor,
    p_hat: torch.Tensor,
    post: GaussianPosterior,
    kl_weight: float,
    body: BodyModel | None = None,
    lambda_fk: float = 1.0,
):
    """Reconstruction + weighted KL.

    Reconstruction is MSE on pose parameters plus ``lambda_fk`` times MSE on
    FK joint positions (skipped when ``body`` is None). Returns the scalar
    loss (gradients flow through it) and a dict of detached components.
    """
    if p.shape != p_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(p.shape)} vs {tuple(p_hat.shape)}")
    recon_pose = ((p_hat - p) ** 2).mean()
    if body is not None and lambda_fk != 0.0:
        joints = forward_kinematics_torch(p, body)
        joints_hat = forward_kinematics_torch(p_hat, body)
        recon_fk = ((joints_hat - joints) ** 2).mean()
    else:
        recon_fk = torch.zeros((), dtype=p.dtype, device=p.device)
    recon = recon_pose + lambda_fk * recon_fk
    kl = kl_standard_normal(post).mean()
    loss = recon + kl_weight * kl
    parts = {
        "recon": float(recon.detach()),
        "recon_pose": float(recon_pose.detach()),
        "recon_fk": float(recon_fk.detach()),
        "kl": float(kl.detach()),
    }
    return loss, parts


def train_vae(dataset, config, body: BodyModel | None = None):
    """Train on a list/array of (F, V) windows; deterministic given config.seed.

    Returns the trained model and the per-step total-loss history.
    """
    data = _stack_dataset(dataset)
    n, f, v = data.shape
    model = build_vae(
        num_frames=f, pose_dim=v, latent_dim=config.latent_dim,
        layers=config.layers, heads=config.heads, seed=config.seed,
        ff_mult=config.ff_mult,
    )
    model.set_pose_stats(torch.from_numpy(data))
    gen = torch.Generator().manual_seed(config.seed + 1)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr_vae)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.vae_steps)
    tensor = torch.from_numpy(data)
    batch = min(config.batch_vae, n)
    history = []
    model.train()
    for _ in range(config.vae_steps):
        idx = torch.randperm(n, generator=gen)[:batch]
        frames = tensor[idx]
        post = model.encode(frames)
        rho = torch.randn(post.mu.shape, generator=gen, dtype=post.mu.dtype)
        z = reparameterize(post, rho)
        p_hat = model.decode(z, f)
        loss, parts = elbo_loss(frames, p_hat, post, config.kl_weight, body=body, lambda_fk=config.lambda_fk)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        parts["loss"] = float(loss.detach())
        history.append(parts)
    model.eval()
    return model, history


def _stack_dataset(dataset) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        arr = dataset.astype(np.float32)
    else:
        items = [it.frames if isinstance(it, PoseSequence) else np.asarray(it, dtype=np.float32) for it in dataset]
        if not items:
            raise ValueError("dataset must be non-empty")
        arr = np.stack(items).astype(np.float32)
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError("dataset must stack to (N, F, V)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("dataset contains non-finite values")
    return arr
