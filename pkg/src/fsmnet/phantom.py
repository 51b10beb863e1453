"""Deterministic synthetic multi-contrast slice generator and corpus file format.

A pair is built from one shared structure field (soft-edged ellipses over a
low-frequency background); the auxiliary and target images apply two distinct
monotone intensity curves to that field, so the two contrasts differ while
their edge maps stay correlated.

Corpus layout: one directory per pair holding ``aux.f32``, ``tar.f32`` (raw
little-endian float32, row-major) and ``meta.json``, plus a ``manifest.json``
at the corpus root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import expit

from .errors import ConfigError

GENERATOR_VERSION = 1

# Distinct smooth monotone intensity curves; the target curve is decreasing,
# mimicking the inverted tissue contrast between T1- and T2-style images.
def _map_aux(s: np.ndarray) -> np.ndarray:
    return np.power(s, 0.7)


def _map_tar(s: np.ndarray) -> np.ndarray:
    return np.power(1.0 - s, 1.8)


@dataclass(frozen=True)
class ContrastPair:
    """Fully sampled auxiliary slice and target ground truth, both in [0, 1]."""

    aux: np.ndarray
    tar: np.ndarray
    id: str
    seed: int


def _normalize01(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _structure_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """Shared anatomy stand-in: 3-8 soft ellipses plus smooth background."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size

    background = gaussian_filter(rng.standard_normal((size, size)), sigma=size / 6.0)
    field = 0.35 * _normalize01(background)

    n_ellipses = int(rng.integers(3, 9))
    edge = 0.025 + 0.035 * rng.random()
    for _ in range(n_ellipses):
        cx, cy = rng.uniform(0.2, 0.8, size=2)
        a, b = rng.uniform(0.08, 0.3, size=2)
        theta = rng.uniform(0.0, np.pi)
        intensity = rng.uniform(0.4, 1.0)
        dx, dy = xx - cx, yy - cy
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        q = (u / a) ** 2 + (v / b) ** 2
        field += intensity * expit((1.0 - q) / edge)
    return _normalize01(field)


def generate_pair(size: int, seed: int) -> ContrastPair:
    """Deterministic (size, size) aux/target pair for one integer seed."""
    if size < 16 or size % 2 != 0:
        raise ConfigError(f"pair size must be even and >= 16, got {size}")
    rng = np.random.default_rng(seed)
    structure = _structure_field(size, rng)
    aux = _normalize01(_map_aux(structure)).astype(np.float32)
    tar = _normalize01(_map_tar(structure)).astype(np.float32)
    return ContrastPair(aux=aux, tar=tar, id=f"pair-{seed:010d}", seed=seed)


def gradient_correlation(pair: ContrastPair) -> float:
    """Pearson correlation of the two gradient-magnitude maps."""
    ga = np.hypot(*np.gradient(pair.aux.astype(np.float64)))
    gt = np.hypot(*np.gradient(pair.tar.astype(np.float64)))
    return float(np.corrcoef(ga.ravel(), gt.ravel())[0, 1])


def _derive_seed(master_seed: int, index: int, attempt: int) -> int:
    return int(np.random.SeedSequence((master_seed, index, attempt)).generate_state(1)[0])


def generate_corpus(count: int, size: int, master_seed: int) -> list[ContrastPair]:
    """Generate ``count`` pairs; degenerate (near-constant) slices are rejected
    and regenerated with an incremented sub-seed."""
    if count <= 0:
        raise ConfigError(f"corpus count must be positive, got {count}")
    pairs = []
    for i in range(count):
        for attempt in range(16):
            pair = generate_pair(size, _derive_seed(master_seed, i, attempt))
            if pair.aux.std() > 1e-3 and pair.tar.std() > 1e-3:
                break
        else:
            raise ConfigError(f"could not generate a non-degenerate pair at index {i}")
        pairs.append(pair)
    return pairs


def write_corpus(pairs: list[ContrastPair], directory) -> dict:
    """Write pairs and the corpus manifest; returns the manifest dict."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    correlations = []
    for pair in pairs:
        pair_dir = directory / pair.id
        pair_dir.mkdir(exist_ok=True)
        (pair_dir / "aux.f32").write_bytes(pair.aux.astype("<f4").tobytes())
        (pair_dir / "tar.f32").write_bytes(pair.tar.astype("<f4").tobytes())
        meta = {"id": pair.id, "seed": pair.seed, "shape": list(pair.aux.shape)}
        (pair_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        entries.append(meta)
        correlations.append(gradient_correlation(pair))
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "count": len(pairs),
        "pairs": entries,
        "gradient_correlation_median": float(np.median(correlations)) if correlations else None,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _read_f32(path: Path, shape) -> np.ndarray:
    if not path.exists():
        raise ConfigError(f"corpus file missing: {path}")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise ConfigError(f"corpus file {path} holds {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def read_pair(pair_dir) -> ContrastPair:
    """Load a single pair directory (aux.f32, tar.f32, meta.json)."""
    pair_dir = Path(pair_dir)
    meta_path = pair_dir / "meta.json"
    if not meta_path.exists():
        raise ConfigError(f"pair metadata missing: {meta_path}")
    meta = json.loads(meta_path.read_text())
    shape = tuple(meta["shape"])
    aux = _read_f32(pair_dir / "aux.f32", shape)
    tar = _read_f32(pair_dir / "tar.f32", shape)
    return ContrastPair(aux=aux, tar=tar, id=meta["id"], seed=int(meta["seed"]))


def read_corpus(directory) -> list[ContrastPair]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"corpus manifest missing: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    return [read_pair(directory / entry["id"]) for entry in manifest["pairs"]]
