"""Evaluation metrics on [0, 1]-normalized images.

PSNR uses a fixed data range of 1 (images are min-max normalized per slice
before evaluation). SSIM follows the standard windowed form: 11x11 Gaussian
window with sigma 1.5, K1 = 0.01, K2 = 0.03, averaged over all fully interior
window positions.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def normalize_unit(x: np.ndarray) -> np.ndarray:
    """Min-max normalization to [0, 1]; constant images cannot be normalized."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        raise ValueError("cannot normalize a constant image to [0, 1]")
    return (x - lo) / (hi - lo)


def normalize_pair(pred: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply the affine map that takes ``ref`` to [0, 1] to both images.

    The prediction is clipped at 0 afterwards (reconstructions may undershoot
    the reference minimum).
    """
    ref = np.asarray(ref, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shapes disagree: {pred.shape} vs {ref.shape}")
    lo, hi = float(ref.min()), float(ref.max())
    if hi - lo < 1e-12:
        raise ValueError("cannot normalize against a constant reference image")
    scale = hi - lo
    return np.clip((pred - lo) / scale, 0.0, None), (ref - lo) / scale


def psnr(x: np.ndarray, ref: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB at data range 1; identical inputs give inf."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shapes disagree: {x.shape} vs {ref.shape}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weighting window."""
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(x: np.ndarray, ref: np.ndarray) -> float:
    """Mean structural similarity over all interior 11x11 window positions."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shapes disagree: {x.shape} vs {ref.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"ssim expects 2-D images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")

    kernel = gaussian_window()
    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(ref, (SSIM_WINDOW, SSIM_WINDOW))
    mu_x = np.tensordot(wx, kernel, axes=([2, 3], [0, 1]))
    mu_y = np.tensordot(wy, kernel, axes=([2, 3], [0, 1]))
    dx = wx - mu_x[..., None, None]
    dy = wy - mu_y[..., None, None]
    var_x = np.tensordot(dx * dx, kernel, axes=([2, 3], [0, 1]))
    var_y = np.tensordot(dy * dy, kernel, axes=([2, 3], [0, 1]))
    cov = np.tensordot(dx * dy, kernel, axes=([2, 3], [0, 1]))

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    return float(score.mean())
