"""Training orchestration and the ablation matrix.

``train_stack`` runs the two-phase recipe: fit the pose VAE on wearer and
interactee windows, freeze it (and the seeded scene encoder), then train the
conditional denoiser on the wearer posterior means. The ablation helpers
reproduce the experiment axes: conditioning on/off, distance strata, gaze
strata, and present-vs-future interactee conditioning.
"""

from __future__ import annotations

import torch

from .analysis import stratify_by_distance, stratify_by_gaze
from .conditioning import build_scene_encoder
from .config import ExperimentConfig
from .diffusion import train_denoiser
from .evaluate import (
    EvaluationResult,
    ModelStack,
    condition_batch,
    episode_windows,
    evaluate_model,
)
from .kinematics import default_body
from .vae import train_vae


def split_dataset(episodes, config: ExperimentConfig):
    """Deterministic train/test split by index."""
    if config.train_episodes > len(episodes):
        raise ValueError(
            f"train_episodes {config.train_episodes} exceeds dataset size {len(episodes)}"
        )
    return episodes[: config.train_episodes], episodes[config.train_episodes :]


def vae_training_windows(episodes, config: ExperimentConfig):
    """Wearer and interactee present windows: the VAE learns one pose manifold for both."""
    windows = []
    for ep in episodes:
        wearer, _ = episode_windows(ep, config.replace(condition_on_future=False))
        windows.append(wearer.frames)
        windows.append(ep.interactee.frames[: config.frames])
    return windows


def wearer_latents(episodes, vae, config: ExperimentConfig) -> torch.Tensor:
    """Clean diffusion targets: posterior means (or samples) of the wearer windows."""
    frames = torch.stack(
        [torch.from_numpy(episode_windows(ep, config)[0].frames) for ep in episodes]
    )
    with torch.no_grad():
        post = vae.encode(frames)
    if config.z0_from_mean:
        return post.mu
    gen = torch.Generator().manual_seed(config.seed + 5)
    rho = torch.randn(post.mu.shape, generator=gen, dtype=post.mu.dtype)
    return post.mu + post.sigma * rho


def train_stack(train_episodes, config: ExperimentConfig, vae=None):
    """Full two-phase training; pass a pre-trained ``vae`` to reuse phase one."""
    config.validate()
    body = default_body()
    if vae is None:
        vae, _ = train_vae(vae_training_windows(train_episodes, config), config, body=body)
    vae.requires_grad_(False)
    scene_encoder = build_scene_encoder(config.latent_dim, seed=config.seed + 4)
    scene_encoder.requires_grad_(False)

    latents = wearer_latents(train_episodes, vae, config)
    cond = condition_batch(train_episodes, vae, scene_encoder, config)
    denoiser, history = train_denoiser(latents, cond, config, frozen_modules=(vae, scene_encoder))
    stack = ModelStack(vae=vae, denoiser=denoiser, scene_encoder=scene_encoder, config=config)
    return stack, history


def eval_seeds(config: ExperimentConfig) -> list[int]:
    return [config.eval_seed + j for j in range(config.samples_per_input)]


CONDITIONING_VARIANTS = (
    ("wo_scene", dict(cond_scene=False, cond_interactee=True)),
    ("wo_interactee", dict(cond_scene=True, cond_interactee=False)),
    ("full", dict(cond_scene=True, cond_interactee=True)),
)


def ablate_conditioning(train_episodes, test_episodes, config: ExperimentConfig, vae=None):
    """Train and evaluate the three conditioning variants; rows mirror the
    scene/interactee on-off grid."""
    rows = []
    for label, overrides in CONDITIONING_VARIANTS:
        variant_cfg = config.replace(**overrides)
        stack, _ = train_stack(train_episodes, variant_cfg, vae=vae)
        result = evaluate_model(stack, test_episodes, eval_seeds(variant_cfg))
        rows.append((label, len(test_episodes), result))
    return rows


def ablate_distance(stack: ModelStack, test_episodes, order=("far", "mid", "near")):
    """Evaluate one trained stack per interpersonal-distance stratum."""
    rows = [("all", len(test_episodes), evaluate_model(stack, test_episodes, eval_seeds(stack.config)))]
    strata = stratify_by_distance(test_episodes)
    for label in order:
        subset = strata[label]
        if subset:
            rows.append((label, len(subset), evaluate_model(stack, subset, eval_seeds(stack.config))))
        else:
            rows.append((label, 0, None))
    return rows


def ablate_gaze(stack: ModelStack, test_episodes, theta_deg: float):
    """Evaluate per mutual-gaze stratum at the given angular threshold."""
    body = default_body()
    rows = [("all", len(test_episodes), evaluate_model(stack, test_episodes, eval_seeds(stack.config)))]
    strata = stratify_by_gaze(test_episodes, theta_deg, body)
    for label in ("non_mutual", "mutual"):
        subset = strata[label]
        if subset:
            rows.append((label, len(subset), evaluate_model(stack, subset, eval_seeds(stack.config))))
        else:
            rows.append((label, 0, None))
    return rows


def ablate_future(train_episodes, test_episodes, config: ExperimentConfig, vae=None):
    """Present-vs-future interactee conditioning (same episodes, same targets)."""
    rows = []
    for label, future in (("present", False), ("future", True)):
        variant_cfg = config.replace(condition_on_future=future)
        variant_cfg.validate()
        stack, _ = train_stack(train_episodes, variant_cfg, vae=vae)
        result = evaluate_model(stack, test_episodes, eval_seeds(variant_cfg))
        rows.append((label, len(test_episodes), result))
    return rows


def run_ablation(axis: str, stack_or_none, train_episodes, test_episodes, config: ExperimentConfig,
                 vae=None):
    """Dispatch on the ablation axis; returns (label, n, EvaluationResult|None) rows."""
    if axis == "conditioning":
        return ablate_conditioning(train_episodes, test_episodes, config, vae=vae)
    if axis == "future":
        return ablate_future(train_episodes, test_episodes, config, vae=vae)
    if stack_or_none is None:
        raise ValueError(f"axis {axis!r} needs trained checkpoints")
    if axis == "distance":
        return ablate_distance(stack_or_none, test_episodes)
    if axis == "gaze30":
        return ablate_gaze(stack_or_none, test_episodes, 30.0)
    if axis == "gaze60":
        return ablate_gaze(stack_or_none, test_episodes, 60.0)
    raise ValueError(f"unknown ablation axis {axis!r}")
