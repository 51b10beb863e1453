"""Training objective: pixel-level L1 on both reconstructions plus a
Fourier-domain amplitude/phase L1 on the frequency-branch output.

All terms are mean-reduced so the trade-off coefficient keeps its meaning
regardless of image size. Phase differences are raw (no 2*pi wrapping): the
wrap discontinuity at +-pi is accepted as-is and test inputs stay away from
the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .kspace import fft2c

FREQUENCY_WEIGHT = 0.01


@dataclass(frozen=True)
class LossBreakdown:
    pixel: torch.Tensor
    frequency: torch.Tensor
    total: torch.Tensor
    lam: float


def _check_shapes(a: torch.Tensor, b: torch.Tensor, who: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{who} expects identical shapes, got {tuple(a.shape)} vs {tuple(b.shape)}")


def pixel_loss(i_spa: torch.Tensor, i_fre: torch.Tensor, i_full: torch.Tensor) -> torch.Tensor:
    _check_shapes(i_spa, i_full, "pixel_loss")
    _check_shapes(i_fre, i_full, "pixel_loss")
    return (i_spa - i_full).abs().mean() + (i_fre - i_full).abs().mean()


def frequency_loss(i_fre: torch.Tensor, i_full: torch.Tensor) -> torch.Tensor:
    _check_shapes(i_fre, i_full, "frequency_loss")
    spec_fre = fft2c(i_fre)
    spec_full = fft2c(i_full)
    amplitude_term = (torch.abs(spec_fre) - torch.abs(spec_full)).abs().mean()
    phase_term = (torch.angle(spec_fre) - torch.angle(spec_full)).abs().mean()
    return amplitude_term + phase_term


def total_loss(recon, i_full: torch.Tensor, lam: float = FREQUENCY_WEIGHT) -> LossBreakdown:
    """Combined objective for a ReconOutput-like object (.i_spa / .i_fre)."""
    pixel = pixel_loss(recon.i_spa, recon.i_fre, i_full)
    frequency = frequency_loss(recon.i_fre, i_full)
    return LossBreakdown(pixel=pixel, frequency=frequency, total=pixel + lam * frequency, lam=lam)
