"""Frequency-spatial feature extraction block.

The spatial branch is a cascade of residual convolution blocks (local,
bounded receptive field). The frequency branch round-trips through the
centered Fourier domain and filters the amplitude and phase maps with 1x1
convolutions (global, image-size receptive field: every Fourier coefficient
depends on every input pixel).

All convolutions keep shape; with zero weights and biases both branches are
exact identities, which the tests rely on.
"""

from __future__ import annotations

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NumericError
from .kspace import fft2c, ifft2c

LEAKY_SLOPE = 0.2


class BranchPair(NamedTuple):
    """Spatial and frequency feature maps of identical shape."""

    spatial: torch.Tensor
    frequency: torch.Tensor


def _check_finite(x: torch.Tensor, stage: str) -> torch.Tensor:
    if not torch.isfinite(x).all():
        raise NumericError(f"non-finite values after stage '{stage}'")
    return x


class ResidualConvBlock(nn.Module):
    """x + conv3x3(lrelu(conv3x3(x))), no normalization."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.leaky_relu(self.conv1(x), LEAKY_SLOPE))


class SpatialBranch(nn.Module):
    """Cascade of residual convolution blocks."""

    def __init__(self, channels: int, num_blocks: int):
        super().__init__()
        self.channels = channels
        self.blocks = nn.ModuleList(ResidualConvBlock(channels) for _ in range(num_blocks))

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"spatial branch expects {self.channels} channels, got {x.shape[1]}")
        for block in self.blocks:
            x = block(x)
        return x


class _PointwiseResidualPath(nn.Module):
    """x + conv1x1(lrelu(conv1x1(x))); per-frequency channel mixing."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 1)
        self.conv2 = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        return x + self.conv2(F.leaky_relu(self.conv1(x), LEAKY_SLOPE))


class FrequencyBranch(nn.Module):
    """FFT -> amplitude/phase filtering -> inverse FFT -> real part."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.amplitude_path = _PointwiseResidualPath(channels)
        self.phase_path = _PointwiseResidualPath(channels)

    def transform(self, x) -> torch.Tensor:
        """Complex output before the real-part extraction."""
        if x.shape[1] != self.channels:
            raise ValueError(f"frequency branch expects {self.channels} channels, got {x.shape[1]}")
        spec = _check_finite(fft2c(x), "fft")
        amplitude = torch.abs(spec)
        phase = torch.angle(spec)
        amplitude = _check_finite(self.amplitude_path(amplitude), "amplitude path")
        phase = _check_finite(self.phase_path(phase), "phase path")
        # Filtered "amplitude" may dip negative; the polar form stays valid
        # (a sign flip is a phase shift), so no clamping here.
        recomposed = torch.complex(amplitude * torch.cos(phase), amplitude * torch.sin(phase))
        return ifft2c(recomposed)

    def forward(self, x):
        return _check_finite(self.transform(x).real, "inverse fft")


class FSFE(nn.Module):
    """Applies the two branches independently; no cross-talk inside the block.

    With ``use_frequency=False`` the frequency branch is an identity (the
    ablation baseline keeps only the spatial path).
    """

    def __init__(self, channels: int, num_blocks: int, use_frequency: bool = True):
        super().__init__()
        self.spatial_branch = SpatialBranch(channels, num_blocks)
        self.frequency_branch = FrequencyBranch(channels) if use_frequency else nn.Identity()

    def forward(self, pair: BranchPair) -> BranchPair:
        return BranchPair(
            spatial=self.spatial_branch(pair.spatial),
            frequency=self.frequency_branch(pair.frequency),
        )
