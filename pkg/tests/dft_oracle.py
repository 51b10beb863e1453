"""Brute-force O(N^2)-per-coefficient discrete Fourier oracle for the centered
orthonormal transform convention (DC at spatial index (H/2, W/2)).

Deliberately written as explicit sums over output frequencies so it shares no
code path with the FFT-based implementation it checks.
"""

import numpy as np


def dft2c_oracle(x: np.ndarray) -> np.ndarray:
    """Forward centered orthonormal 2-D DFT of one (H, W) slice."""
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.complex128)
    m = np.arange(h) - h // 2
    n = np.arange(w) - w // 2
    for u in range(h):
        for v in range(w):
            ku, kv = u - h // 2, v - w // 2
            kernel = np.exp(-2j * np.pi * (ku * m[:, None] / h + kv * n[None, :] / w))
            out[u, v] = (x * kernel).sum()
    return out / np.sqrt(h * w)


def idft2c_oracle(s: np.ndarray) -> np.ndarray:
    """Inverse centered orthonormal 2-D DFT of one (H, W) slice."""
    h, w = s.shape
    out = np.zeros((h, w), dtype=np.complex128)
    u = np.arange(h) - h // 2
    v = np.arange(w) - w // 2
    for m in range(h):
        for n in range(w):
            km, kn = m - h // 2, n - w // 2
            kernel = np.exp(2j * np.pi * (km * u[:, None] / h + kn * v[None, :] / w))
            out[m, n] = (s * kernel).sum()
    return out / np.sqrt(h * w)
