"""Command-line surface.

Subcommands: gen-data, mask, train, eval, recon, ablate. A JSON config file
(``--config``) may carry {"model": {...}, "train": {...}} sections; explicit
command-line flags override it. FSMNET_DATA_DIR provides the corpus-dir
default. Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, NumericError
from .evaluate import evaluate, reconstruct, run_ablation
from .kspace import make_mask, save_mask
from .model import ModelConfig
from .phantom import generate_corpus, write_corpus
from .train import TrainConfig, dump_schedule, train

ENV_DATA_DIR = "FSMNET_DATA_DIR"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the random seed")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _corpus_dir(args) -> Path:
    if getattr(args, "corpus", None) is not None:
        return args.corpus
    env = os.environ.get(ENV_DATA_DIR)
    if env:
        return Path(env)
    raise ConfigError(f"no corpus directory given (pass --corpus or set {ENV_DATA_DIR})")


def _model_config(args, file_config: dict) -> ModelConfig:
    section = dict(file_config.get("model", {}))
    if getattr(args, "base_channels", None) is not None:
        section["base_channels"] = args.base_channels
    return ModelConfig.from_dict(section)


def _train_config(args, file_config: dict) -> TrainConfig:
    section = dict(file_config.get("train", {}))
    for flag, key in (
        ("iterations", "iterations"),
        ("batch_size", "batch_size"),
        ("lr", "lr"),
        ("af", "af"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            section[key] = value
    if getattr(args, "paper_preset", False):
        section["paper_preset"] = True
    return TrainConfig.from_dict(section)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsmnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a phantom corpus")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--size", type=int, default=32)

    p = sub.add_parser("mask", help="generate a Cartesian sampling mask")
    _add_common(p)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--af", type=float, required=True)
    p.add_argument("--center-frac", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="train a model on a corpus")
    _add_common(p)
    p.add_argument("--corpus", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--af", type=float, default=None)
    p.add_argument("--base-channels", dest="base_channels", type=int, default=None)
    p.add_argument("--paper-preset", action="store_true")
    p.add_argument(
        "--schedule-only",
        action="store_true",
        help="print the learning-rate schedule as JSON and exit without training",
    )

    p = sub.add_parser("eval", help="evaluate a checkpoint against a corpus")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--corpus", type=Path, default=None)
    p.add_argument("--af", type=float, default=4.0)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument(
        "--use-ground-truth",
        action="store_true",
        help="debug: score the ground truth as the prediction",
    )

    p = sub.add_parser("recon", help="reconstruct a single pair directory")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pair", type=Path, required=True)
    p.add_argument("--af", type=float, default=4.0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dump-internals", action="store_true")

    p = sub.add_parser("ablate", help="run the four module-switch configurations")
    _add_common(p)
    p.add_argument("--corpus", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seeds", type=str, default="0,1,2")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--af", type=float, default=None)
    p.add_argument("--base-channels", dest="base_channels", type=int, default=None)
    return parser


def _run(args) -> int:
    file_config = _load_config_file(args.config)

    if args.command == "gen-data":
        seed = args.seed if args.seed is not None else 0
        pairs = generate_corpus(args.count, args.size, seed)
        manifest = write_corpus(pairs, args.out)
        print(f"wrote {manifest['count']} pairs to {args.out}")
        return 0

    if args.command == "mask":
        seed = args.seed if args.seed is not None else 0
        mask = make_mask(args.h, args.w, args.af, args.center_frac, seed)
        save_mask(mask, args.out)
        print(f"wrote {args.h}x{args.w} mask ({int(mask.mask[0].sum())} columns) to {args.out}")
        return 0

    if args.command == "train":
        train_config = _train_config(args, file_config)
        if args.schedule_only:
            print(json.dumps(dump_schedule(train_config), indent=2))
            return 0
        model_config = _model_config(args, file_config)
        result = train(model_config, train_config, _corpus_dir(args), args.out)
        print(f"checkpoint: {result.checkpoint_path}")
        print(f"log: {result.log_path}")
        return 0

    if args.command == "eval":
        report = evaluate(
            args.checkpoint,
            _corpus_dir(args),
            args.af,
            args.report,
            use_ground_truth=args.use_ground_truth,
        )
        model = report["model"]
        zf = report["zero_fill"]
        print(
            f"model: psnr {model['psnr_mean']:.3f}+-{model['psnr_std']:.3f} "
            f"ssim {model['ssim_mean']:.4f}+-{model['ssim_std']:.4f}"
        )
        print(f"zero-fill: psnr {zf['psnr_mean']:.3f}+-{zf['psnr_std']:.3f}")
        return 0

    if args.command == "recon":
        meta = reconstruct(
            args.checkpoint, args.pair, args.af, args.out, dump_internals=args.dump_internals
        )
        print(f"reconstructed {meta['pair_id']} -> {args.out} (mean error {meta['error_map_mean']:.5f})")
        return 0

    if args.command == "ablate":
        try:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip() != "")
        except ValueError as exc:
            raise ConfigError(f"--seeds must be a comma-separated integer list: {args.seeds}") from exc
        if not seeds:
            raise ConfigError("--seeds must name at least one seed")
        model_config = _model_config(args, file_config)
        train_config = _train_config(args, file_config)
        table = run_ablation(_corpus_dir(args), args.out, model_config, train_config, seeds)
        print(f"{'config':24s} {'median psnr':>12s} {'median ssim':>12s}")
        for name, stats in table["summary"].items():
            print(f"{name:24s} {stats['psnr_median']:12.3f} {stats['ssim_median']:12.4f}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
