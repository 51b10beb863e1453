"""Evaluation, single-pair reconstruction, and the ablation harness.

Evaluation uses one deterministic mask per slice (seed = slice index) so
repeated runs produce byte-identical reports, and always includes the
zero-filling baseline computed on the same masks.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import ConfigError
from .kspace import make_mask, undersample, zero_fill
from .metrics import normalize_pair, psnr, ssim
from .model import FSMNet, ModelConfig, load_checkpoint
from .phantom import ContrastPair, read_corpus, read_pair
from .train import TrainConfig, default_center_fraction, train

ABLATION_ROWS = (
    ("baseline_concat_unet", {"use_fsfe_frequency": False, "cms_mode": "concat", "fs_mode": "sum"}),
    ("fsfe_only", {"use_fsfe_frequency": True, "cms_mode": "sum", "fs_mode": "sum"}),
    ("fsfe_cms", {"use_fsfe_frequency": True, "cms_mode": "selective", "fs_mode": "sum"}),
    ("full", {"use_fsfe_frequency": True, "cms_mode": "selective", "fs_mode": "selective"}),
)


def _slice_inputs(pair: ContrastPair, af: float, mask_seed: int):
    gt = torch.from_numpy(pair.tar)[None, None].float()
    aux = torch.from_numpy(pair.aux)[None, None].float()
    h, w = pair.tar.shape
    mask = make_mask(h, w, af, default_center_fraction(af), seed=mask_seed)
    x_zf = zero_fill(undersample(gt, mask))
    return x_zf, aux


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        # covers the all-infinite PSNR sentinel from perfect reconstructions
        return {"mean": float(arr[0]), "std": 0.0}
    with np.errstate(invalid="ignore"):
        return {"mean": float(arr.mean()), "std": float(arr.std())}


def evaluate_model(
    model: FSMNet | None,
    pairs: list[ContrastPair],
    af: float,
    use_ground_truth: bool = False,
) -> dict:
    """Metrics report dict; ``use_ground_truth`` scores the ground truth as the
    prediction (debug route for checking the metric plumbing)."""
    if not pairs:
        raise ConfigError("cannot evaluate an empty corpus")
    if model is None and not use_ground_truth:
        raise ConfigError("evaluation needs a model unless use_ground_truth is set")
    per_slice = []
    for index, pair in enumerate(pairs):
        x_zf, aux = _slice_inputs(pair, af, mask_seed=index)
        if use_ground_truth:
            pred = pair.tar.astype(np.float64)
        else:
            with torch.no_grad():
                pred = model(x_zf, aux).i_spa[0, 0].numpy()
        pred_n, gt_n = normalize_pair(pred, pair.tar)
        zf_n, _ = normalize_pair(x_zf[0, 0].numpy(), pair.tar)
        per_slice.append(
            {
                "id": pair.id,
                "psnr": psnr(pred_n, gt_n),
                "ssim": ssim(pred_n, gt_n),
                "psnr_zero_fill": psnr(zf_n, gt_n),
                "ssim_zero_fill": ssim(zf_n, gt_n),
            }
        )
    report = {
        "af": af,
        "count": len(per_slice),
        "model": {
            "psnr_mean": _stats([s["psnr"] for s in per_slice])["mean"],
            "psnr_std": _stats([s["psnr"] for s in per_slice])["std"],
            "ssim_mean": _stats([s["ssim"] for s in per_slice])["mean"],
            "ssim_std": _stats([s["ssim"] for s in per_slice])["std"],
        },
        "zero_fill": {
            "psnr_mean": _stats([s["psnr_zero_fill"] for s in per_slice])["mean"],
            "psnr_std": _stats([s["psnr_zero_fill"] for s in per_slice])["std"],
            "ssim_mean": _stats([s["ssim_zero_fill"] for s in per_slice])["mean"],
            "ssim_std": _stats([s["ssim_zero_fill"] for s in per_slice])["std"],
        },
        "per_slice": per_slice,
    }
    return report


def evaluate(
    checkpoint_path,
    corpus_dir,
    af: float,
    report_path,
    use_ground_truth: bool = False,
) -> dict:
    pairs = read_corpus(corpus_dir)
    model = None
    if not use_ground_truth:
        model, _ = load_checkpoint(checkpoint_path)
        model.eval()
    report = evaluate_model(model, pairs, af, use_ground_truth=use_ground_truth)
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _write_raw_and_preview(array: np.ndarray, stem: Path, preview_scale: float | None = None):
    stem.with_suffix(".f32").write_bytes(array.astype("<f4").tobytes())
    scale = preview_scale
    if scale is None:
        scale = float(array.max()) or 1.0
    preview = np.clip(array / scale, 0.0, 1.0)
    Image.fromarray((preview * 255.0).round().astype(np.uint8)).save(stem.with_suffix(".png"))


def reconstruct(
    checkpoint_path,
    pair_dir,
    af: float,
    out_dir,
    dump_internals: bool = False,
) -> dict:
    """Write reconstruction, zero-filled input, and absolute-error map
    (raw f32 plus 8-bit previews); optionally dump gate/attention internals."""
    model, _ = load_checkpoint(checkpoint_path)
    model.eval()
    pair = read_pair(pair_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    x_zf, aux = _slice_inputs(pair, af, mask_seed=pair.seed)
    internals: dict | None = {} if dump_internals else None
    with torch.no_grad():
        recon = model(x_zf, aux, internals=internals).i_spa[0, 0].numpy()
    zf = x_zf[0, 0].numpy()
    error_map = np.abs(recon - pair.tar)

    _write_raw_and_preview(recon, out_dir / "reconstruction", preview_scale=1.0)
    _write_raw_and_preview(zf, out_dir / "zero_fill", preview_scale=1.0)
    _write_raw_and_preview(pair.tar, out_dir / "ground_truth", preview_scale=1.0)
    _write_raw_and_preview(error_map, out_dir / "error_map")

    meta = {
        "pair_id": pair.id,
        "af": af,
        "mask_seed": pair.seed,
        "shape": list(pair.tar.shape),
        "error_map_mean": float(error_map.mean()),
    }
    if internals is not None:
        internals_dir = out_dir / "internals"
        internals_dir.mkdir(exist_ok=True)
        index = {}
        for key, tensor in internals.items():
            fname = key.replace("/", "_") + ".f32"
            arr = tensor.numpy()
            (internals_dir / fname).write_bytes(arr.astype("<f4").tobytes())
            index[key] = {"file": fname, "shape": list(arr.shape)}
        (internals_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
        meta["internals"] = sorted(index)
    (out_dir / "recon_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def run_ablation(
    corpus_dir,
    out_dir,
    base_model_config: ModelConfig,
    base_train_config: TrainConfig,
    seeds=(0, 1, 2),
) -> dict:
    """Train and evaluate the four module-switch configurations per seed,
    then summarize medians into a comparison table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = read_corpus(corpus_dir)
    rows = []
    for name, switches in ABLATION_ROWS:
        for seed in seeds:
            model_config = replace(base_model_config, **switches)
            train_config = replace(base_train_config, seed=seed)
            run_dir = out_dir / f"{name}_seed{seed}"
            result = train(model_config, train_config, corpus_dir, run_dir)
            model, _ = load_checkpoint(result.checkpoint_path)
            model.eval()
            report = evaluate_model(model, pairs, base_train_config.af)
            rows.append(
                {
                    "config": name,
                    "seed": seed,
                    "psnr_mean": report["model"]["psnr_mean"],
                    "ssim_mean": report["model"]["ssim_mean"],
                    "psnr_zero_fill": report["zero_fill"]["psnr_mean"],
                }
            )
    summary = {
        name: {
            "psnr_median": statistics.median(r["psnr_mean"] for r in rows if r["config"] == name),
            "ssim_median": statistics.median(r["ssim_mean"] for r in rows if r["config"] == name),
        }
        for name, _ in ABLATION_ROWS
    }
    table = {"rows": rows, "summary": summary, "seeds": list(seeds)}
    (out_dir / "ablation.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "ablation.csv", "w") as fh:
        fh.write("config,seed,psnr_mean,ssim_mean,psnr_zero_fill\n")
        for r in rows:
            fh.write(
                f"{r['config']},{r['seed']},{r['psnr_mean']:.4f},"
                f"{r['ssim_mean']:.6f},{r['psnr_zero_fill']:.4f}\n"
            )
    return table
