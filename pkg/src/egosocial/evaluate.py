"""End-to-end evaluation: sample wearer latents, decode, run FK, score.

Generation is deterministic given the seed list: each episode draws its
initial noise from a seed derived from (sample seed, episode index), so
results do not depend on batch composition and merge by sequence index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .analysis import future_shift
from .conditioning import (
    SceneEncoder,
    build_condition_bundle,
    bundles_to_batch,
    encode_interactee,
    encode_scene,
    perturb_interactee,
    subsample_pointcloud,
)
from .config import ExperimentConfig
from .diffusion import DenoiserModel, ddim_sample, make_noise_schedule
from .errors import MissingInputError
from .fk_torch import axis_angle_to_matrix_torch, forward_kinematics_torch
from .kinematics import BodyModel, PoseSequence, default_body
from .metrics import MetricsReport, mean_report, sequence_report
from .vae import VaeModel


@dataclass
class ModelStack:
    vae: VaeModel
    denoiser: DenoiserModel
    scene_encoder: SceneEncoder | None
    config: ExperimentConfig


@dataclass
class EvaluationResult:
    report_mean: MetricsReport
    report_best: MetricsReport
    per_sequence: list[dict]
    num_samples: int


def derived_seed(*parts: int) -> int:
    """Stable child seed from non-negative integer parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def episode_windows(episode, config: ExperimentConfig):
    """(wearer window, interactee conditioning window) for one episode.

    The wearer target window is always the present [0, frames); the
    interactee window is shifted forward by ``future_offset`` when
    ``condition_on_future`` is set.
    """
    offset = config.future_offset if config.condition_on_future else 0
    wearer = future_shift(episode.wearer, 0, config.frames)
    interactee = future_shift(episode.interactee, offset, config.frames)
    return wearer, interactee


def condition_batch(episodes, vae: VaeModel, scene_encoder: SceneEncoder | None,
                    config: ExperimentConfig) -> torch.Tensor | None:
    """(B, K, D) conditioning tokens for a list of episodes (None if unconditional)."""
    if config.cond_scene and scene_encoder is None:
        raise MissingInputError("scene conditioning requested but no scene encoder given")
    bundles = []
    for ep in episodes:
        interactee_token = None
        scene_token = None
        if config.cond_interactee:
            _, window = episode_windows(ep, config)
            if config.interactee_noise_sigma > 0:
                window = perturb_interactee(
                    window, config.interactee_noise_sigma, derived_seed(config.seed, ep.seed, 11)
                )
            interactee_token = encode_interactee(window, vae)
        if config.cond_scene:
            cloud = subsample_pointcloud(ep.scene, config.scene_points, derived_seed(ep.seed, 7))
            scene_token = encode_scene(cloud, scene_encoder)
        bundles.append(build_condition_bundle(interactee_token, scene_token))
    return bundles_to_batch(bundles)


def generate_wearer(stack: ModelStack, episodes, sample_seed: int) -> list[PoseSequence]:
    """One generated wearer window per episode, deterministic in sample_seed."""
    config = stack.config
    sched = make_noise_schedule(config.timesteps, config.beta_start, config.beta_end)
    cond = condition_batch(episodes, stack.vae, stack.scene_encoder, config)
    z_init = torch.stack(
        [
            torch.randn(
                stack.denoiser.latent_dim,
                generator=torch.Generator().manual_seed(derived_seed(sample_seed, i)),
            )
            for i in range(len(episodes))
        ]
    )
    z = ddim_sample(stack.denoiser, sched, config.steps_inference, cond=cond, z_init=z_init)
    z = z * stack.denoiser.latent_std + stack.denoiser.latent_mean
    with torch.no_grad():
        frames = stack.vae.decode(z, config.frames)
    return [
        PoseSequence(frames=frames[i].cpu().numpy().astype(np.float32), fps=config.fps)
        for i in range(len(episodes))
    ]


def _sequence_metrics(pred: PoseSequence, gt: PoseSequence, body: BodyModel) -> MetricsReport:
    pred_t = torch.from_numpy(pred.frames).double()
    gt_t = torch.from_numpy(gt.frames).double()
    joints_pred = forward_kinematics_torch(pred_t, body).numpy()
    joints_gt = forward_kinematics_torch(gt_t, body).numpy()
    rot_pred = axis_angle_to_matrix_torch(pred_t[:, :3]).numpy()
    rot_gt = axis_angle_to_matrix_torch(gt_t[:, :3]).numpy()
    return sequence_report(
        joints_pred, joints_gt, rot_pred, rot_gt,
        pred.frames[:, -3:], gt.frames[:, -3:], fps=gt.fps,
    )


def evaluate_model(stack: ModelStack, episodes, seeds, samples_per_input: int | None = None,
                   body: BodyModel | None = None) -> EvaluationResult:
    """Generate, score and aggregate.

    ``seeds`` gives one master seed per hypothesis sample; with more than one
    the result reports both the mean over samples and the per-sequence best
    (selected by MPJPE).
    """
    if not episodes:
        raise ValueError("need at least one episode")
    seeds = list(seeds)
    if samples_per_input is not None and samples_per_input != len(seeds):
        raise ValueError("samples_per_input must match the number of seeds")
    if not seeds:
        raise ValueError("need at least one seed")
    body = body if body is not None else default_body()

    # per_sample[j][i] = metrics of sample j on episode i
    per_sample: list[list[MetricsReport]] = []
    gts = [episode_windows(ep, stack.config)[0] for ep in episodes]
    for seed in seeds:
        preds = generate_wearer(stack, episodes, seed)
        per_sample.append([_sequence_metrics(p, g, body) for p, g in zip(preds, gts)])

    rows = []
    mean_reports = []
    best_reports = []
    for i in range(len(episodes)):
        candidates = [per_sample[j][i] for j in range(len(seeds))]
        best = min(candidates, key=lambda r: r.mpjpe)
        mean = mean_report(candidates)
        best_reports.append(best)
        mean_reports.append(mean)
        rows.append(
            {
                "sequence": i,
                "mpjpe_mm": mean.mpjpe,
                "orientation_error": mean.orientation_error,
                "translation_error_mm": mean.translation_error,
                "acceleration_error_mm_s2": mean.acceleration_error,
                "best_mpjpe_mm": best.mpjpe,
                "best_translation_error_mm": best.translation_error,
            }
        )
    return EvaluationResult(
        report_mean=mean_report(mean_reports),
        report_best=mean_report(best_reports),
        per_sequence=rows,
        num_samples=len(seeds),
    )


def evaluate_ground_truth(episodes, config: ExperimentConfig, body: BodyModel | None = None) -> MetricsReport:
    """Score the ground truth against itself (all-zero sanity baseline)."""
    body = body if body is not None else default_body()
    reports = []
    for ep in episodes:
        gt, _ = episode_windows(ep, config)
        reports.append(_sequence_metrics(gt, gt, body))
    return mean_report(reports)
