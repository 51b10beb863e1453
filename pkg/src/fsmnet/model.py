"""FSMNet assembly: dual-modality encoder, neck, and target-only decoder.

Layout for ``stages = S`` (default 3):

    stems (1 -> C) for target and auxiliary; both branches of a modality
    start from the same stem output.

    encoder stage i (channels C * 2**i):
        FSFE on target and auxiliary, CMS-fusion per branch (auxiliary into
        target), FS-fusion across the target branches, then stride-2
        downsampling with channel doubling on all four streams. The fused
        target pair feeds the decoder skip connection at this resolution.

    neck (channels C * 2**S): one encoder stage without the downsampling.

    decoder stage j: nearest x2 upsampling + 3x3 conv with channel halving on
        both target branches, additive skip from the mirrored encoder stage,
        then FSFE and FS-fusion (no CMS: only the target is decoded).

    heads: two 3x3 convs project each branch to one channel; both outputs are
    added to the zero-filled input (global residual learning).

The parameter count of every configuration has a closed form; see
``expected_param_count``.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointError, ConfigError, NumericError
from .fsfe import FSFE, BranchPair
from .fusion import CMS_MODES, FS_MODES, CMSFusion, FSFusion

CHECKPOINT_FORMAT_VERSION = 1
_DTYPE_TAGS = {torch.float32: "<f4", torch.float64: "<f8"}
_TAG_DTYPES = {"<f4": torch.float32, "<f8": torch.float64}


@dataclass
class ModelConfig:
    base_channels: int = 8
    stages: int = 3
    residual_blocks_per_fsfe: int = 2
    heads: int = 1
    use_fsfe_frequency: bool = True
    cms_mode: str = "selective"
    fs_mode: str = "selective"

    def validate(self) -> "ModelConfig":
        if self.stages < 1:
            raise ConfigError(f"stages must be >= 1, got {self.stages}")
        if self.base_channels < 2:
            raise ConfigError(f"base_channels must be >= 2, got {self.base_channels}")
        if self.residual_blocks_per_fsfe < 1:
            raise ConfigError(
                f"residual_blocks_per_fsfe must be >= 1, got {self.residual_blocks_per_fsfe}"
            )
        if self.heads < 1 or self.base_channels % self.heads != 0:
            raise ConfigError(
                f"heads ({self.heads}) must divide base_channels ({self.base_channels})"
            )
        if self.cms_mode not in CMS_MODES:
            raise ConfigError(f"cms_mode must be one of {CMS_MODES}, got {self.cms_mode!r}")
        if self.fs_mode not in FS_MODES:
            raise ConfigError(f"fs_mode must be one of {FS_MODES}, got {self.fs_mode!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {field for field in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**data).validate()


class ReconOutput(NamedTuple):
    """Spatial-branch reconstruction (the deliverable) and frequency-branch one."""

    i_spa: torch.Tensor
    i_fre: torch.Tensor


class _FusionStage(nn.Module):
    """FSFE + per-branch CMS-fusion + FS-fusion for one resolution level."""

    def __init__(self, channels: int, config: ModelConfig, with_aux: bool):
        super().__init__()
        k = config.residual_blocks_per_fsfe
        self.fsfe_target = FSFE(channels, k, config.use_fsfe_frequency)
        self.with_aux = with_aux
        if with_aux:
            self.fsfe_aux = FSFE(channels, k, config.use_fsfe_frequency)
            self.cms_spatial = CMSFusion(channels, config.cms_mode)
            self.cms_frequency = CMSFusion(channels, config.cms_mode)
        self.fs = FSFusion(channels, config.heads, config.fs_mode)

    def forward(self, target: BranchPair, aux: BranchPair | None, internals, tag):
        target = self.fsfe_target(target)
        aux_out = None
        if self.with_aux:
            aux_out = self.fsfe_aux(aux)
            enhanced_spatial = self.cms_spatial(
                target.spatial, aux_out.spatial, internals, f"{tag}.cms_spatial"
            )
            enhanced_frequency = self.cms_frequency(
                target.frequency, aux_out.frequency, internals, f"{tag}.cms_frequency"
            )
        else:
            enhanced_spatial, enhanced_frequency = target
        fused = self.fs(enhanced_spatial, enhanced_frequency, internals, f"{tag}.fs")
        return fused, aux_out


class _Downsample(nn.Module):
    """Stride-2 3x3 convolution, channel doubling."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, 2 * channels, 3, stride=2, padding=1)

    def forward(self, x):
        return self.conv(x)


class _Upsample(nn.Module):
    """Nearest x2 followed by a 3x3 convolution halving channels."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels // 2, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class FSMNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        c = config.base_channels
        s = config.stages

        self.stem_target = nn.Conv2d(1, c, 3, padding=1)
        self.stem_aux = nn.Conv2d(1, c, 3, padding=1)

        self.encoder = nn.ModuleList()
        self.down_target_spatial = nn.ModuleList()
        self.down_target_frequency = nn.ModuleList()
        self.down_aux_spatial = nn.ModuleList()
        self.down_aux_frequency = nn.ModuleList()
        for i in range(s):
            ci = c * 2**i
            self.encoder.append(_FusionStage(ci, config, with_aux=True))
            self.down_target_spatial.append(_Downsample(ci))
            self.down_target_frequency.append(_Downsample(ci))
            self.down_aux_spatial.append(_Downsample(ci))
            self.down_aux_frequency.append(_Downsample(ci))

        self.neck = _FusionStage(c * 2**s, config, with_aux=True)

        self.up_spatial = nn.ModuleList()
        self.up_frequency = nn.ModuleList()
        self.decoder = nn.ModuleList()
        for j in range(s):
            cj = c * 2 ** (s - j)
            self.up_spatial.append(_Upsample(cj))
            self.up_frequency.append(_Upsample(cj))
            self.decoder.append(_FusionStage(cj // 2, config, with_aux=False))

        self.head_spatial = nn.Conv2d(c, 1, 3, padding=1)
        self.head_frequency = nn.Conv2d(c, 1, 3, padding=1)

    def _check_inputs(self, x_tar_zf, x_aux):
        if x_tar_zf.shape != x_aux.shape:
            raise ValueError(
                f"target {tuple(x_tar_zf.shape)} and auxiliary {tuple(x_aux.shape)} shapes disagree"
            )
        if x_tar_zf.ndim != 4 or x_tar_zf.shape[1] != 1:
            raise ValueError(f"inputs must be (B, 1, H, W), got {tuple(x_tar_zf.shape)}")
        h, w = x_tar_zf.shape[-2:]
        divisor = 2 ** (self.config.stages + 1)
        if h % divisor != 0 or w % divisor != 0:
            raise ValueError(
                f"input {h}x{w} reaches an odd intermediate resolution; "
                f"H and W must be multiples of {divisor} for {self.config.stages} stages"
            )

    def forward(self, x_tar_zf, x_aux, internals=None) -> ReconOutput:
        self._check_inputs(x_tar_zf, x_aux)
        t = self.stem_target(x_tar_zf)
        a = self.stem_aux(x_aux)
        target = BranchPair(spatial=t, frequency=t)
        aux = BranchPair(spatial=a, frequency=a)

        skips = []
        for i, stage in enumerate(self.encoder):
            fused, aux_out = stage(target, aux, internals, f"encoder{i}")
            skips.append(fused)
            target = BranchPair(
                spatial=self.down_target_spatial[i](fused.spatial),
                frequency=self.down_target_frequency[i](fused.frequency),
            )
            aux = BranchPair(
                spatial=self.down_aux_spatial[i](aux_out.spatial),
                frequency=self.down_aux_frequency[i](aux_out.frequency),
            )

        target, _ = self.neck(target, aux, internals, "neck")

        for j, stage in enumerate(self.decoder):
            skip = skips[len(skips) - 1 - j]
            target = BranchPair(
                spatial=self.up_spatial[j](target.spatial) + skip.spatial,
                frequency=self.up_frequency[j](target.frequency) + skip.frequency,
            )
            target, _ = stage(target, None, internals, f"decoder{j}")

        i_spa = x_tar_zf + self.head_spatial(target.spatial)
        i_fre = x_tar_zf + self.head_frequency(target.frequency)
        return ReconOutput(i_spa=i_spa, i_fre=i_fre)


def init_parameters(model: nn.Module, seed: int) -> None:
    """Deterministic init: fan-in-scaled uniform conv weights, zero biases."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for _, p in model.named_parameters():
            if p.ndim == 1:
                p.zero_()
            else:
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                bound = 1.0 / fan_in**0.5
                p.uniform_(-bound, bound, generator=gen)


def build_model(config: ModelConfig, seed: int, diagnostic: bool = False) -> FSMNet:
    config.validate()
    model = FSMNet(config)
    init_parameters(model, seed)
    if diagnostic:
        dead = gradient_coverage_gaps(model, seed)
        if dead:
            raise NumericError(f"parameters with zero gradient on a random batch: {dead}")
    return model


def gradient_coverage_gaps(model: FSMNet, seed: int) -> list[str]:
    """Names of parameters that receive no gradient from one random batch."""
    from .losses import total_loss  # local import: losses has no model dependency

    size = 2 ** (model.config.stages + 1)
    gen = torch.Generator().manual_seed(seed)
    x_zf = torch.rand((2, 1, size, size), generator=gen)
    x_aux = torch.rand((2, 1, size, size), generator=gen)
    gt = torch.rand((2, 1, size, size), generator=gen)
    model.zero_grad(set_to_none=True)
    breakdown = total_loss(model(x_zf, x_aux), gt)
    breakdown.total.backward()
    dead = [
        name
        for name, p in model.named_parameters()
        if p.grad is None or not bool(p.grad.abs().max() > 0)
    ]
    model.zero_grad(set_to_none=True)
    return dead


def _conv_params(cin: int, cout: int, k: int) -> int:
    return k * k * cin * cout + cout


def _fsfe_params(c: int, config: ModelConfig) -> int:
    total = config.residual_blocks_per_fsfe * 2 * _conv_params(c, c, 3)
    if config.use_fsfe_frequency:
        total += 4 * _conv_params(c, c, 1)  # amplitude and phase paths, 2 convs each
    return total


def _cms_params(c: int, mode: str) -> int:
    if mode == "selective":
        return _conv_params(2 * c, 2 * c, 3)
    if mode == "concat":
        return _conv_params(2 * c, c, 3)
    return 0


def _fs_params(c: int, mode: str) -> int:
    if mode == "sum":
        return 0
    return 4 * _conv_params(c, c, 1) + _cms_params(c, "selective")


def expected_param_count(config: ModelConfig) -> int:
    """Closed-form parameter tally, kept independent of the module tree.

    stems            2 * conv(1, C, 3)
    encoder stage i  2 * fsfe(C_i) + 2 * cms(C_i) + fs(C_i) + 4 * conv(C_i, 2C_i, 3)
    neck             2 * fsfe(C_S) + 2 * cms(C_S) + fs(C_S)
    decoder stage j  2 * conv(2C_j, C_j, 3) + fsfe(C_j) + fs(C_j)
    heads            2 * conv(C, 1, 3)

    with C_i = base_channels * 2**i and conv(cin, cout, k) counting
    k*k*cin*cout weights plus cout biases.
    """
    config.validate()
    c, s = config.base_channels, config.stages
    total = 2 * _conv_params(1, c, 3) + 2 * _conv_params(c, 1, 3)
    for i in range(s):
        ci = c * 2**i
        total += 2 * _fsfe_params(ci, config)
        total += 2 * _cms_params(ci, config.cms_mode)
        total += _fs_params(ci, config.fs_mode)
        total += 4 * _conv_params(ci, 2 * ci, 3)
    cn = c * 2**s
    total += 2 * _fsfe_params(cn, config) + 2 * _cms_params(cn, config.cms_mode)
    total += _fs_params(cn, config.fs_mode)
    for j in range(s):
        cj = c * 2 ** (s - j - 1)
        total += 2 * _conv_params(2 * cj, cj, 3)
        total += _fsfe_params(cj, config) + _fs_params(cj, config.fs_mode)
    return total


def save_checkpoint(model: FSMNet, path) -> None:
    """Self-describing archive: config JSON plus raw little-endian float arrays."""
    path = Path(path)
    entries = []
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, p in model.named_parameters():
            tag = _DTYPE_TAGS.get(p.dtype)
            if tag is None:
                raise CheckpointError(f"unsupported parameter dtype {p.dtype} for {name}")
            entries.append({"name": name, "shape": list(p.shape), "dtype": tag})
            zf.writestr(f"params/{name}", p.detach().cpu().numpy().astype(tag).tobytes())
        zf.writestr(
            "config.json", json.dumps(model.config.to_dict(), indent=2, sort_keys=True)
        )
        manifest = {"format_version": CHECKPOINT_FORMAT_VERSION, "params": entries}
        zf.writestr("manifest.json", json.dumps(manifest, indent=2))


def load_checkpoint(path) -> tuple[FSMNet, ModelConfig]:
    """Rebuild the model; names and shapes are validated against the config."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with zipfile.ZipFile(path, "r") as zf:
        try:
            config = ModelConfig.from_dict(json.loads(zf.read("config.json")))
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError as exc:
            raise CheckpointError(f"checkpoint {path} is missing {exc}") from exc
        model = FSMNet(config)
        expected = {name: tuple(p.shape) for name, p in model.named_parameters()}
        stored = {e["name"]: tuple(e["shape"]) for e in manifest["params"]}
        problems = []
        for name, shape in stored.items():
            if name not in expected:
                problems.append(f"unexpected array {name}")
            elif expected[name] != shape:
                problems.append(f"{name}: archive {shape} vs config {expected[name]}")
        for name in expected:
            if name not in stored:
                problems.append(f"missing array {name}")
        if problems:
            raise CheckpointError(
                f"checkpoint {path} incompatible with its config: " + "; ".join(problems)
            )
        params = dict(model.named_parameters())
        with torch.no_grad():
            for entry in manifest["params"]:
                raw = zf.read(f"params/{entry['name']}")
                arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
                params[entry["name"]].data = torch.from_numpy(arr).to(
                    _TAG_DTYPES[entry["dtype"]]
                )
    return model, config
