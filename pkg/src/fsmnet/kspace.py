"""Centered orthonormal 2-D Fourier transforms, amplitude/phase decomposition,
Cartesian line undersampling, and the zero-filling baseline.

Conventions:
    - Image batches are real tensors of shape (B, C, H, W) with even H and W.
    - Spectra are complex tensors of the same shape with the DC coefficient at
      spatial index (H // 2, W // 2).
    - Transforms use orthonormal scaling, so round trips and Parseval hold in
      exact form and loss magnitudes do not depend on image size.
    - Sampling masks are (H, W) float32 arrays of 0/1 whose columns are fully
      sampled k-space lines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class AmpPhase:
    """Polar decomposition of a spectrum: amplitude >= 0, phase in (-pi, pi]."""

    amplitude: torch.Tensor
    phase: torch.Tensor


@dataclass(frozen=True)
class SamplingMask:
    """Cartesian line sampling pattern over an (H, W) k-space grid.

    Every column is either fully acquired (1.0) or skipped (0.0). The centered
    block of ceil(center_fraction * W) columns is always acquired.
    """

    mask: np.ndarray
    acceleration_factor: float
    center_fraction: float
    seed: int

    @property
    def shape(self):
        return self.mask.shape

    def sampled_columns(self) -> np.ndarray:
        return np.flatnonzero(self.mask[0])

    def as_tensor(self, dtype=torch.float32) -> torch.Tensor:
        """Mask as a (1, 1, H, W) tensor, broadcastable over batch/channel."""
        return torch.from_numpy(self.mask).to(dtype).unsqueeze(0).unsqueeze(0)


def _check_image_batch(x: torch.Tensor, name: str = "input") -> None:
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-D (B, C, H, W), got shape {tuple(x.shape)}")
    h, w = x.shape[-2:]
    if h % 2 != 0 or w % 2 != 0:
        raise ValueError(f"{name} requires even H and W, got {h}x{w}")
    if not torch.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite values")


def fft2c(x: torch.Tensor) -> torch.Tensor:
    """Centered orthonormal 2-D FFT over the last two axes of a real batch."""
    if x.is_complex():
        raise ValueError("fft2c expects a real image batch")
    _check_image_batch(x, "fft2c input")
    shifted = torch.fft.ifftshift(x, dim=(-2, -1))
    spec = torch.fft.fft2(shifted, dim=(-2, -1), norm="ortho")
    return torch.fft.fftshift(spec, dim=(-2, -1))


def ifft2c(s: torch.Tensor, real_output: bool = False) -> torch.Tensor:
    """Inverse of fft2c.

    With ``real_output=True`` the imaginary residue is checked against 1e-4
    (max magnitude) and discarded; a larger residue raises NumericError.
    """
    if not s.is_complex():
        raise ValueError("ifft2c expects a complex spectrum")
    _check_image_batch(s, "ifft2c input")
    shifted = torch.fft.ifftshift(s, dim=(-2, -1))
    img = torch.fft.ifft2(shifted, dim=(-2, -1), norm="ortho")
    img = torch.fft.fftshift(img, dim=(-2, -1))
    if not real_output:
        return img
    residue = img.imag.abs().max().item()
    if residue >= 1e-4:
        raise NumericError(
            f"ifft2c imaginary residue {residue:.3e} exceeds 1e-4; "
            "spectrum is not Hermitian enough for a real output"
        )
    return img.real


def decompose(s: torch.Tensor) -> AmpPhase:
    """Split a spectrum into amplitude sqrt(re^2 + im^2) and full-quadrant phase.

    Phase comes from the two-argument arctangent, range (-pi, pi]; the
    degenerate point re = im = 0 maps to phase 0.
    """
    if not s.is_complex():
        raise ValueError("decompose expects a complex spectrum")
    _check_image_batch(s, "decompose input")
    return AmpPhase(amplitude=torch.abs(s), phase=torch.angle(s))


def recompose(ap: AmpPhase) -> torch.Tensor:
    """Rebuild the complex spectrum amplitude * exp(i * phase)."""
    if (ap.amplitude < 0).any():
        raise ValueError("recompose requires a non-negative amplitude")
    return torch.polar(ap.amplitude, ap.phase)


def make_mask(h: int, w: int, af: float, center_fraction: float, seed: int) -> SamplingMask:
    """Random Cartesian line mask: a fully sampled centered block plus
    uniformly chosen extra columns, floor(w / af) sampled columns in total.
    """
    if h <= 0 or w <= 0:
        raise ConfigError(f"mask size must be positive, got {h}x{w}")
    if af < 1:
        raise ConfigError(f"acceleration factor must be >= 1, got {af}")
    if not 0 < center_fraction < 1 / af:
        raise ConfigError(
            f"center_fraction must lie in (0, 1/af) = (0, {1 / af:.4f}), got {center_fraction}"
        )
    n_center = math.ceil(center_fraction * w)
    budget = int(w // af)
    if n_center > budget:
        raise ConfigError(
            f"center block of {n_center} columns exceeds the sampling budget "
            f"of {budget} columns at af={af}"
        )
    start = (w - n_center) // 2
    center_cols = np.arange(start, start + n_center)
    rest = np.setdiff1d(np.arange(w), center_cols)
    rng = np.random.default_rng(seed)
    extra = rng.choice(rest, size=budget - n_center, replace=False)
    mask = np.zeros((h, w), dtype=np.float32)
    mask[:, center_cols] = 1.0
    mask[:, extra] = 1.0
    return SamplingMask(mask=mask, acceleration_factor=af, center_fraction=center_fraction, seed=seed)


def undersample(x: torch.Tensor, m: SamplingMask) -> torch.Tensor:
    """Masked k-space of an image batch: fft2c(x) * mask."""
    if tuple(x.shape[-2:]) != m.shape:
        raise ValueError(f"image {tuple(x.shape[-2:])} and mask {m.shape} shapes disagree")
    return fft2c(x) * m.as_tensor(dtype=x.dtype).to(x.device)


def zero_fill(s_masked: torch.Tensor) -> torch.Tensor:
    """Zero-filling baseline: real part of the inverse transform, clipped at 0."""
    return ifft2c(s_masked).real.clamp(min=0)


def save_mask(m: SamplingMask, path) -> None:
    """Write a mask as raw little-endian float32 (row-major) plus a JSON sidecar."""
    path = Path(path)
    path.write_bytes(m.mask.astype("<f4").tobytes())
    sidecar = {
        "h": int(m.mask.shape[0]),
        "w": int(m.mask.shape[1]),
        "af": float(m.acceleration_factor),
        "center_fraction": float(m.center_fraction),
        "seed": int(m.seed),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_mask(path) -> SamplingMask:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if not sidecar_path.exists():
        raise ConfigError(f"mask sidecar not found: {sidecar_path}")
    meta = json.loads(sidecar_path.read_text())
    h, w = int(meta["h"]), int(meta["w"])
    raw = path.read_bytes()
    expected = h * w * 4
    if len(raw) != expected:
        raise ConfigError(f"mask file {path} holds {len(raw)} bytes, expected {expected}")
    mask = np.frombuffer(raw, dtype="<f4").reshape(h, w).copy()
    return SamplingMask(
        mask=mask,
        acceleration_factor=float(meta["af"]),
        center_fraction=float(meta["center_fraction"]),
        seed=int(meta["seed"]),
    )
