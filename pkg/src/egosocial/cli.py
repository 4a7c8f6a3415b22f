"""Command-line workflows: generate-data, train-vae, train-denoiser, sample,
evaluate, ablate.

Configuration resolution order: dataclass defaults < checkpoint snapshot (for
commands that load one) < --config file < individual --<field> flags. Exit
codes: 0 success, 2 config error, 3 missing input, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .checkpoint import load_denoiser, load_scene_encoder, load_vae, save_checkpoint
from .config import ExperimentConfig, config_from_pairs, load_config
from .dataio import read_dataset, write_dataset, write_poses
from .errors import ConfigError, DatasetFormatError, EgosocialError, MissingInputError
from .evaluate import ModelStack, evaluate_model, generate_wearer
from .experiments import eval_seeds, run_ablation, split_dataset, train_stack
from .reporting import (
    ablation_table,
    version_string,
    write_ablation_csv,
    write_metrics_report,
    write_per_sequence_csv,
)
from .synth import generate_dataset
from .vae import train_vae
from .experiments import vae_training_windows


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="key: value config file")
    for field in dataclasses.fields(ExperimentConfig):
        parser.add_argument(f"--{field.name}", dest=f"cfg_{field.name}", default=None,
                            metavar="V", help=argparse.SUPPRESS)


def _resolve_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig()
    if args.config is not None:
        cfg = load_config(_existing(args.config), base=cfg)
    pairs = {
        f.name: getattr(args, f"cfg_{f.name}")
        for f in dataclasses.fields(ExperimentConfig)
        if getattr(args, f"cfg_{f.name}", None) is not None
    }
    cfg = config_from_pairs(pairs, base=cfg)
    cfg.validate()
    return cfg


def _existing(path: str | None) -> Path:
    if path is None:
        raise MissingInputError("a required input path was not given")
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"required input {p} does not exist")
    return p


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "version_string": version_string(),
        "config": ";".join(cfg.to_text().strip().splitlines()),
    }


def cmd_generate_data(args) -> int:
    cfg = _resolve_config(args)
    episodes = generate_dataset(
        cfg.scenario, cfg.episodes, cfg.frames + cfg.future_margin, cfg.coupling,
        master_seed=cfg.seed, fps=cfg.fps, scene_points=cfg.scene_points,
    )
    write_dataset(episodes, args.out, extra_header=_provenance(cfg))
    print(f"wrote {len(episodes)} episodes to {args.out}")
    return 0


def cmd_train_vae(args) -> int:
    cfg = _resolve_config(args)
    episodes = read_dataset(_existing(args.dataset))
    from .kinematics import default_body

    model, history = train_vae(vae_training_windows(episodes[: cfg.train_episodes], cfg), cfg,
                               body=default_body())
    save_checkpoint(model, "vae", cfg, cfg.seed, args.out, version_string=version_string())
    print(f"trained VAE for {len(history)} steps (final loss {history[-1]:.6f}); wrote {args.out}")
    return 0


def cmd_train_denoiser(args) -> int:
    vae, ckpt_cfg, _ = load_vae(_existing(args.vae))
    cfg = _resolve_config(args, base=ckpt_cfg)
    episodes = read_dataset(_existing(args.dataset))
    train_eps, _ = split_dataset(episodes, cfg)
    stack, history = train_stack(train_eps, cfg, vae=vae)
    save_checkpoint(stack.denoiser, "denoiser", cfg, cfg.seed, args.out, version_string=version_string())
    scene_out = args.scene_out or f"{args.out}.scene"
    if stack.scene_encoder is not None:
        save_checkpoint(stack.scene_encoder, "scene_encoder", cfg, cfg.seed, scene_out,
                        version_string=version_string())
    print(f"trained denoiser for {len(history)} steps (final loss {history[-1]:.6f}); wrote {args.out}")
    return 0


def _load_stack(args, cfg_override_args) -> ModelStack:
    vae, _, _ = load_vae(_existing(args.vae))
    denoiser, den_cfg, _ = load_denoiser(_existing(args.denoiser))
    cfg = _resolve_config(cfg_override_args, base=den_cfg)
    scene_encoder = None
    if cfg.cond_scene:
        if not args.scene:
            raise MissingInputError("scene conditioning is on but --scene checkpoint not given")
        scene_encoder, _, _ = load_scene_encoder(_existing(args.scene))
    return ModelStack(vae=vae, denoiser=denoiser, scene_encoder=scene_encoder, config=cfg)


def cmd_sample(args) -> int:
    stack = _load_stack(args, args)
    episodes = read_dataset(_existing(args.dataset))
    _, test_eps = split_dataset(episodes, stack.config)
    subset = test_eps if test_eps else episodes
    sequences = generate_wearer(stack, subset, sample_seed=stack.config.eval_seed)
    write_poses(sequences, args.out, extra_header=_provenance(stack.config))
    print(f"sampled {len(sequences)} wearer sequences to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    stack = _load_stack(args, args)
    episodes = read_dataset(_existing(args.dataset))
    _, test_eps = split_dataset(episodes, stack.config)
    subset = test_eps if test_eps else episodes
    result = evaluate_model(stack, subset, eval_seeds(stack.config))
    prefix = Path(args.out_prefix)
    write_metrics_report(
        f"{prefix}.report.txt", result.report_mean, stack.config,
        extra={"sequences": len(subset), "samples_per_input": result.num_samples,
               "best_of_k_mpjpe_mm": f"{result.report_best.mpjpe:.6f}"},
    )
    write_per_sequence_csv(f"{prefix}.per_sequence.csv", result, stack.config)
    print(result.report_mean.to_text().rstrip())
    print(f"wrote {prefix}.report.txt and {prefix}.per_sequence.csv")
    return 0


def cmd_ablate(args) -> int:
    episodes = read_dataset(_existing(args.dataset))
    if args.axis in ("conditioning", "future"):
        cfg = _resolve_config(args)
        train_eps, test_eps = split_dataset(episodes, cfg)
        rows = run_ablation(args.axis, None, train_eps, test_eps, cfg)
    else:
        stack = _load_stack(args, args)
        _, test_eps = split_dataset(episodes, stack.config)
        subset = test_eps if test_eps else episodes
        rows = run_ablation(args.axis, stack, None, subset, stack.config)
        cfg = stack.config
    write_ablation_csv(args.out, rows, cfg)
    print(ablation_table(rows).rstrip())
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egosocial",
        description="Two-phase wearer-pose generation: pose VAE + conditional latent diffusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a synthetic episode dataset")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train-vae", help="phase 1: fit the pose VAE")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-denoiser", help="phase 2: fit the conditional denoiser")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scene-out", default=None, help="scene-encoder checkpoint path (default OUT.scene)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train_denoiser)

    p = sub.add_parser("sample", help="generate wearer sequences for a dataset's conditions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--denoiser", required=True)
    p.add_argument("--scene", default=None)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score generated sequences against ground truth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--denoiser", required=True)
    p.add_argument("--scene", default=None)
    p.add_argument("--out-prefix", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run one ablation axis and write its CSV")
    p.add_argument("--axis", required=True,
                   choices=["conditioning", "distance", "gaze30", "gaze60", "future"])
    p.add_argument("--dataset", required=True)
    p.add_argument("--vae", default=None)
    p.add_argument("--denoiser", default=None)
    p.add_argument("--scene", default=None)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MissingInputError, FileNotFoundError) as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 3
    except (DatasetFormatError, EgosocialError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
