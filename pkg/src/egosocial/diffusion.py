"""Latent diffusion: noise schedule, forward noising, denoiser, loss, sampler.

Timesteps are 1-based (t in [1, T]); ``alpha_bar[t-1]`` is the cumulative
signal factor at step t. The forward process is the closed-form jump from a
clean latent, z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, and the denoiser
is trained to predict eps. Sampling is deterministic DDIM-style (eta = 0)
over a uniformly strided timestep subsequence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .vae import sinusoidal_positions


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        for name in ("beta", "alpha", "alpha_bar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        t = self.beta.shape[0]
        if t < 1 or self.alpha.shape != (t,) or self.alpha_bar.shape != (t,):
            raise ValueError("beta/alpha/alpha_bar must be equal-length 1-D arrays")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ValueError("beta values must lie strictly in (0, 1)")
        if np.any(np.diff(self.beta) < 0):
            raise ValueError("beta must be non-decreasing")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if not (0.0 < self.alpha_bar[-1] < 1.0):
            raise ValueError("alpha_bar must stay in (0, 1)")

    @property
    def num_steps(self) -> int:
        return int(self.beta.shape[0])


def make_noise_schedule(timesteps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule with alpha_bar as the running product of (1 - beta)."""
    if timesteps < 1:
        raise ValueError("timesteps must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    beta = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _alpha_bar_at(sched: NoiseSchedule, t, like: torch.Tensor) -> torch.Tensor:
    """alpha_bar for 1-based timesteps t, broadcast against a (B, D) latent."""
    t_arr = torch.as_tensor(t, dtype=torch.long)
    if t_arr.ndim == 0:
        t_arr = t_arr.reshape(1)
    if bool((t_arr < 1).any()) or bool((t_arr > sched.num_steps).any()):
        raise ValueError(f"timestep out of range [1, {sched.num_steps}]")
    ab = torch.as_tensor(sched.alpha_bar, dtype=like.dtype, device=like.device)[t_arr - 1]
    while ab.ndim < like.ndim:
        ab = ab.unsqueeze(-1)
    return ab


def q_sample(z0: torch.Tensor, t, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Noised latent z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps."""
    z0 = torch.as_tensor(z0)
    eps = torch.as_tensor(eps, dtype=z0.dtype, device=z0.device)
    if eps.shape != z0.shape:
        raise ValueError("eps must match z0's shape")
    ab = _alpha_bar_at(sched, t, z0)
    return torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps


class DenoiserModel(nn.Module):
    """Attention denoiser on a single latent token.

    Each block runs self-attention over the latent token, cross-attention
    against the conditioning tokens (skipped when there are none), and a
    feed-forward, all pre-norm with residuals. The timestep enters as a
    sinusoidal embedding passed through a small MLP and added to the token.
    """

    def __init__(self, latent_dim: int, layers: int = 9, heads: int = 4, ff_mult: int = 4,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.latent_dim = latent_dim
        d = latent_dim
        self.time_mlp = nn.Sequential(
            nn.Linear(d, ff_mult * d, dtype=dtype), nn.SiLU(), nn.Linear(ff_mult * d, d, dtype=dtype)
        )
        self.blocks = nn.ModuleList([_DenoiserBlock(d, heads, ff_mult, dtype) for _ in range(layers)])
        self.final_norm = nn.LayerNorm(d, dtype=dtype)
        self.output_proj = nn.Linear(d, d, dtype=dtype)
        # Latent standardization stats, filled in by training; identity by default.
        self.register_buffer("latent_mean", torch.zeros(d, dtype=dtype))
        self.register_buffer("latent_std", torch.ones(d, dtype=dtype))

    def forward(self, z_t: torch.Tensor, t, cond: torch.Tensor | None = None) -> torch.Tensor:
        squeeze = z_t.ndim == 1
        if squeeze:
            z_t = z_t.unsqueeze(0)
        b = z_t.shape[0]
        t_arr = torch.as_tensor(t, dtype=torch.float64, device=z_t.device).reshape(-1)
        if t_arr.shape[0] == 1:
            t_arr = t_arr.expand(b)
        t_emb = _timestep_embedding(t_arr, self.latent_dim, z_t.dtype)
        x = (z_t + self.time_mlp(t_emb)).unsqueeze(1)
        if cond is not None and cond.numel() > 0:
            if cond.ndim == 2:
                cond = cond.unsqueeze(0).expand(b, -1, -1)
            cond = cond.detach().to(z_t.dtype)
        else:
            cond = None
        for block in self.blocks:
            x = block(x, cond)
        out = self.output_proj(self.final_norm(x)).squeeze(1)
        return out.squeeze(0) if squeeze else out


class _DenoiserBlock(nn.Module):
    def __init__(self, d: int, heads: int, ff_mult: int, dtype: torch.dtype):
        super().__init__()
        self.norm1 = nn.LayerNorm(d, dtype=dtype)
        self.self_attn = nn.MultiheadAttention(d, heads, batch_first=True, dtype=dtype)
        self.norm2 = nn.LayerNorm(d, dtype=dtype)
        self.cross_attn = nn.MultiheadAttention(d, heads, batch_first=True, dtype=dtype)
        self.norm3 = nn.LayerNorm(d, dtype=dtype)
        self.ff = nn.Sequential(
            nn.Linear(d, ff_mult * d, dtype=dtype), nn.GELU(), nn.Linear(ff_mult * d, d, dtype=dtype)
        )

    def forward(self, x: torch.Tensor, cond: torch.Tensor | None) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.self_attn(h, h, h, need_weights=False)[0]
        if cond is not None:
            h = self.norm2(x)
            x = x + self.cross_attn(h, cond, cond, need_weights=False)[0]
        x = x + self.ff(self.norm3(x))
        return x


def _timestep_embedding(t: torch.Tensor, dim: int, dtype: torch.dtype) -> torch.Tensor:
    import math

    half = (dim + 1) // 2
    freq = torch.exp(
        torch.arange(half, dtype=torch.float64, device=t.device) * (-math.log(10000.0) / max(half - 1, 1))
    )
    args = t.unsqueeze(1) * freq
    emb = torch.zeros(t.shape[0], dim, dtype=torch.float64, device=t.device)
    emb[:, 0::2] = torch.sin(args)[:, : emb[:, 0::2].shape[1]]
    emb[:, 1::2] = torch.cos(args)[:, : emb[:, 1::2].shape[1]]
    return emb.to(dtype)


def build_denoiser(latent_dim: int, layers: int, heads: int, seed: int, ff_mult: int = 4,
                   dtype: torch.dtype = torch.float32) -> DenoiserModel:
    """Construct a denoiser with deterministic, seed-controlled initialization."""
    torch.manual_seed(seed)
    return DenoiserModel(latent_dim, layers, heads, ff_mult=ff_mult, dtype=dtype)


def diffusion_loss(z0: torch.Tensor, t, eps: torch.Tensor, cond: torch.Tensor | None, model,
                   sched: NoiseSchedule) -> torch.Tensor:
    """Mean over the batch of ||eps - eps_hat(z_t, t, cond)||_2^2.

    Conditioning tokens are detached inside the model, so gradients reach the
    denoiser parameters only.
    """
    z_t = q_sample(z0, t, eps, sched)
    eps_hat = model(z_t, t, cond)
    return ((eps_hat - eps) ** 2).sum(dim=-1).mean()


def ddim_timesteps(total: int, steps: int) -> np.ndarray:
    """Descending 1-based timesteps, uniformly spaced from T down toward 1."""
    if not 1 <= steps <= total:
        raise ValueError(f"steps must lie in [1, {total}]")
    return np.round(np.linspace(total, 1, steps)).astype(np.int64)


def ddim_sample(
    model,
    sched: NoiseSchedule,
    steps: int,
    cond: torch.Tensor | None = None,
    seed: int | None = None,
    z_init: torch.Tensor | None = None,
    n_samples: int = 1,
    latent_dim: int | None = None,
) -> torch.Tensor:
    """Deterministic (eta = 0) sampler; returns a (B, D) latent batch.

    At each visited timestep the clean-latent estimate
    zhat0 = (z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t) is re-projected
    onto the next timestep of the subsequence; the final step returns zhat0.
    ``z_init`` overrides the seeded standard-normal start (used by tests that
    plant a known trajectory).
    """
    ts = ddim_timesteps(sched.num_steps, steps)
    if z_init is not None:
        z = torch.as_tensor(z_init)
        if z.ndim == 1:
            z = z.unsqueeze(0)
    else:
        if latent_dim is None:
            latent_dim = getattr(model, "latent_dim", None)
            if latent_dim is None:
                raise ValueError("latent_dim required when model does not expose one")
        if cond is not None and cond.ndim == 3:
            n_samples = cond.shape[0]
        gen = torch.Generator().manual_seed(0 if seed is None else int(seed))
        z = torch.randn(n_samples, latent_dim, generator=gen)
    out_dtype = z.dtype
    model_dtype = out_dtype
    if isinstance(model, nn.Module):
        model_dtype = next(model.parameters()).dtype
    # Integrate in float64: the final 1/sqrt(alpha_bar) amplifies rounding by
    # orders of magnitude at late timesteps.
    z = z.double()
    with torch.no_grad():
        for i, t_cur in enumerate(ts):
            ab_t = _alpha_bar_at(sched, int(t_cur), z)
            t_batch = torch.full((z.shape[0],), int(t_cur), dtype=torch.long)
            eps_hat = model(z.to(model_dtype), t_batch, cond).double()
            z0_hat = (z - torch.sqrt(1.0 - ab_t) * eps_hat) / torch.sqrt(ab_t)
            if i == len(ts) - 1:
                z = z0_hat
            else:
                ab_next = _alpha_bar_at(sched, int(ts[i + 1]), z)
                z = torch.sqrt(ab_next) * z0_hat + torch.sqrt(1.0 - ab_next) * eps_hat
    return z.to(out_dtype)


def parameter_hash(module: nn.Module) -> str:
    """SHA-256 over all named parameters (sorted by name, float32 little-endian)."""
    digest = hashlib.sha256()
    for name, param in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        digest.update(name.encode())
        digest.update(str(tuple(param.shape)).encode())
        arr = param.detach().cpu().numpy().astype("<f4", copy=False)
        digest.update(arr.tobytes())
    return digest.hexdigest()


def train_denoiser(latents: torch.Tensor, cond: torch.Tensor | None, config, frozen_modules=()):
    """Train an eps-predicting denoiser on precomputed clean latents.

    ``latents`` is (N, D); ``cond`` is (N, K, D) or None. Frozen modules (the
    VAE, the scene encoder) are hash-checked before and after: training must
    not touch them. Returns the model and the per-step loss history.

    The latents are standardized per-dimension before diffusion; the stats
    are stored on the model (``latent_mean`` / ``latent_std``) so samples can
    be mapped back before decoding.
    """
    if latents.ndim != 2 or latents.shape[0] < 1:
        raise ValueError("latents must be a non-empty (N, D) tensor")
    hashes_before = [parameter_hash(m) for m in frozen_modules]
    for m in frozen_modules:
        m.requires_grad_(False)

    sched = make_noise_schedule(config.timesteps, config.beta_start, config.beta_end)
    model = build_denoiser(
        latents.shape[1], config.layers, config.heads, seed=config.seed + 2, ff_mult=config.ff_mult
    )
    mean = latents.mean(dim=0)
    std = latents.std(dim=0).clamp(min=1e-4)
    model.latent_mean.copy_(mean)
    model.latent_std.copy_(std)
    z_all = (latents - mean) / std

    gen = torch.Generator().manual_seed(config.seed + 3)
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr_denoiser)
    lr_sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=config.denoiser_steps)
    n = z_all.shape[0]
    batch = min(config.batch_denoiser, n)
    history = []
    model.train()
    for _ in range(config.denoiser_steps):
        idx = torch.randperm(n, generator=gen)[:batch]
        z0 = z_all[idx]
        c = cond[idx] if cond is not None else None
        t = torch.randint(1, sched.num_steps + 1, (batch,), generator=gen)
        eps = torch.randn(z0.shape, generator=gen, dtype=z0.dtype)
        loss = diffusion_loss(z0, t, eps, c, model, sched)
        opt.zero_grad()
        loss.backward()
        opt.step()
        lr_sched.step()
        history.append(float(loss.detach()))
    model.eval()

    hashes_after = [parameter_hash(m) for m in frozen_modules]
    if hashes_before != hashes_after:
        raise RuntimeError("frozen module parameters changed during denoiser training")
    return model, history
