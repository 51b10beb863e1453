"""Optimization loop: AdamW with a step-decay schedule, fresh random masks per
training sample, CSV logging, and periodic checkpointing.

The desk preset (the defaults below) is sized for toy corpora; the paper
preset pins the published schedule and exists for documentation fidelity, not
for CI runs.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, NumericError
from .kspace import make_mask, undersample, zero_fill
from .losses import total_loss
from .model import FSMNet, ModelConfig, build_model, save_checkpoint
from .phantom import read_corpus

LOG_HEADER = ("iter", "lr", "pixel", "freq", "total")

PAPER_PRESET = {
    "iterations": 100_000,
    "batch_size": 4,
    "lr": 1e-4,
    "lr_decay_factor": 0.1,
    "lr_decay_every": 20_000,
    "beta1": 0.9,
    "beta2": 0.999,
}


def default_center_fraction(af: float) -> float:
    """Fully sampled center fraction by acceleration: 0.08 at 4x, 0.04 at 8x."""
    return 0.32 / af


@dataclass
class TrainConfig:
    iterations: int = 300
    batch_size: int = 4
    lr: float = 2e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 150
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    af: float = 4.0
    seed: int = 0
    paper_preset: bool = False
    checkpoint_every: int = 100

    def __post_init__(self):
        if self.paper_preset:
            for key, value in PAPER_PRESET.items():
                setattr(self, key, value)

    def validate(self) -> "TrainConfig":
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        for name in ("beta1", "beta2"):
            beta = getattr(self, name)
            if not 0 <= beta < 1:
                raise ConfigError(f"{name} must be in [0, 1), got {beta}")
        if self.af < 1:
            raise ConfigError(f"af must be >= 1, got {self.af}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {field for field in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**data).validate()


def lr_at(config: TrainConfig, iteration: int) -> float:
    """Closed-form step decay: lr * factor ** floor(iteration / every)."""
    return config.lr * config.lr_decay_factor ** (iteration // config.lr_decay_every)


def dump_schedule(config: TrainConfig) -> dict:
    """Schedule summary without running training: lr at every decay boundary."""
    config.validate()
    boundaries = list(range(0, config.iterations, config.lr_decay_every)) or [0]
    return {
        "iterations": config.iterations,
        "batch_size": config.batch_size,
        "beta1": config.beta1,
        "beta2": config.beta2,
        "weight_decay": config.weight_decay,
        "lr_schedule": [{"iteration": it, "lr": lr_at(config, it)} for it in boundaries],
    }


def make_optimizer(model: FSMNet, config: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        model.parameters(),
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )


@dataclass(frozen=True)
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    final_loss: float | None


def _zero_filled_batch(tar: torch.Tensor, af: float, mask_seeds) -> torch.Tensor:
    """Per-sample fresh masks; tar is (B, 1, H, W)."""
    h, w = tar.shape[-2:]
    cf = default_center_fraction(af)
    slices = []
    for b in range(tar.shape[0]):
        mask = make_mask(h, w, af, cf, seed=int(mask_seeds[b]))
        slices.append(zero_fill(undersample(tar[b : b + 1], mask)))
    return torch.cat(slices, dim=0)


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    corpus_dir,
    out_dir,
) -> TrainResult:
    model_config.validate()
    train_config.validate()
    pairs = read_corpus(corpus_dir)
    if not pairs:
        raise ConfigError(f"corpus at {corpus_dir} is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    aux_all = torch.from_numpy(np.stack([p.aux for p in pairs])[:, None]).float()
    tar_all = torch.from_numpy(np.stack([p.tar for p in pairs])[:, None]).float()

    model = build_model(model_config, seed=train_config.seed)
    optimizer = make_optimizer(model, train_config)

    sample_rng = np.random.default_rng(np.random.SeedSequence((train_config.seed, 1)))
    mask_rng = np.random.default_rng(np.random.SeedSequence((train_config.seed, 2)))

    checkpoint_path = out_dir / "checkpoint.fsm"
    log_path = out_dir / "train_log.csv"
    last_good: Path | None = None
    final_loss = None

    with open(log_path, "w", newline="") as log_file:
        writer = csv.writer(log_file)
        writer.writerow(LOG_HEADER)
        for it in range(train_config.iterations):
            lr = lr_at(train_config, it)
            for group in optimizer.param_groups:
                group["lr"] = lr
            idx = sample_rng.choice(
                len(pairs), size=train_config.batch_size, replace=len(pairs) < train_config.batch_size
            )
            batch_tar = tar_all[idx]
            batch_aux = aux_all[idx]
            mask_seeds = mask_rng.integers(0, 2**31 - 1, size=train_config.batch_size)
            x_zf = _zero_filled_batch(batch_tar, train_config.af, mask_seeds)

            where = last_good if last_good is not None else "none saved yet"
            try:
                breakdown = total_loss(model(x_zf, batch_aux), batch_tar)
            except NumericError as exc:
                log_file.flush()
                raise NumericError(
                    f"{exc} (iteration {it}; last good checkpoint: {where})"
                ) from exc
            if not torch.isfinite(breakdown.total):
                log_file.flush()
                raise NumericError(
                    f"non-finite loss at iteration {it}; last good checkpoint: {where}"
                )
            optimizer.zero_grad(set_to_none=True)
            breakdown.total.backward()
            optimizer.step()

            final_loss = breakdown.total.item()
            writer.writerow(
                (it, lr, breakdown.pixel.item(), breakdown.frequency.item(), final_loss)
            )
            if (it + 1) % train_config.checkpoint_every == 0:
                periodic = out_dir / f"checkpoint_{it + 1:06d}.fsm"
                save_checkpoint(model, periodic)
                last_good = periodic

    save_checkpoint(model, checkpoint_path)
    return TrainResult(checkpoint_path=checkpoint_path, log_path=log_path, final_loss=final_loss)
