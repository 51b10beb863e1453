"""Feature fusion blocks.

CMS-fusion blends two same-shape feature maps with pixel-wise sigmoid gates
predicted from their concatenation. FS-fusion exchanges information between
the spatial and frequency branches with cross attention over channel tokens
(each channel flattened over H*W is one token, so the attention matrix is
C x C and cost stays linear in image size), then combines the two attended
maps with the same pixel-wise selective gating.

Both modules take an optional ``internals`` dict; when provided, gate maps and
attention matrices are stored in it (detached) under ``tag``-prefixed keys.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .fsfe import BranchPair

CMS_MODES = ("selective", "sum", "concat")
FS_MODES = ("selective", "sum")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, who: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{who} expects identical shapes, got {tuple(a.shape)} vs {tuple(b.shape)}")


class CMSFusion(nn.Module):
    """Pixel-wise selective blending of two feature maps.

    selective: one 3x3 conv on the concatenation predicts 2C gate logits;
               output = sigmoid(s_t) * f_target + sigmoid(s_a) * f_aux.
    sum:       f_target + f_aux (no parameters, ablation variant).
    concat:    3x3 conv maps the concatenation back to C channels (ablation
               baseline fusion).
    """

    def __init__(self, channels: int, mode: str = "selective"):
        super().__init__()
        if mode not in CMS_MODES:
            raise ValueError(f"cms mode must be one of {CMS_MODES}, got {mode!r}")
        self.mode = mode
        if mode == "selective":
            self.gate_conv = nn.Conv2d(2 * channels, 2 * channels, 3, padding=1)
        elif mode == "concat":
            self.fuse_conv = nn.Conv2d(2 * channels, channels, 3, padding=1)

    def forward(self, f_target, f_aux, internals=None, tag="cms"):
        _check_same_shape(f_target, f_aux, "cms fusion")
        if self.mode == "sum":
            return f_target + f_aux
        stacked = torch.cat([f_target, f_aux], dim=1)
        if self.mode == "concat":
            return self.fuse_conv(stacked)
        scores = torch.sigmoid(self.gate_conv(stacked))
        s_target, s_aux = scores.chunk(2, dim=1)
        if internals is not None:
            internals[f"{tag}.gate_primary"] = s_target.detach()
            internals[f"{tag}.gate_secondary"] = s_aux.detach()
        return s_target * f_target + s_aux * f_aux


class FSFusion(nn.Module):
    """Cross-branch attention followed by pixel-wise selective fusion.

    Spatial-enhancing path: queries are the spatial channel tokens, keys and
    values come from the frequency map; the projected attention output is
    added back to the spatial input (and symmetrically for the frequency
    path). The returned pair carries the selective fusion of both attended
    maps on the spatial branch and the attended frequency map on the
    frequency branch.

    sum mode drops attention entirely: (f_spa + f_freq, f_freq).
    """

    def __init__(self, channels: int, heads: int = 1, mode: str = "selective"):
        super().__init__()
        if mode not in FS_MODES:
            raise ValueError(f"fs mode must be one of {FS_MODES}, got {mode!r}")
        if channels % heads != 0:
            raise ValueError(f"channels ({channels}) must be divisible by heads ({heads})")
        self.mode = mode
        self.heads = heads
        if mode == "selective":
            self.spatial_value = nn.Conv2d(channels, channels, 1)
            self.spatial_proj = nn.Conv2d(channels, channels, 1)
            self.frequency_value = nn.Conv2d(channels, channels, 1)
            self.frequency_proj = nn.Conv2d(channels, channels, 1)
            self.select = CMSFusion(channels, mode="selective")

    def _attend(self, query_map, source_map, value_conv, proj_conv):
        b, c, h, w = query_map.shape
        d = h * w
        q = query_map.reshape(b, self.heads, c // self.heads, d)
        k = source_map.reshape(b, self.heads, c // self.heads, d)
        v = value_conv(source_map).reshape(b, self.heads, c // self.heads, d)
        weights = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(d), dim=-1)
        out = (weights @ v).reshape(b, c, h, w)
        return proj_conv(out) + query_map, weights

    def forward(self, f_spa, f_freq, internals=None, tag="fs") -> BranchPair:
        _check_same_shape(f_spa, f_freq, "fs fusion")
        if self.mode == "sum":
            return BranchPair(spatial=f_spa + f_freq, frequency=f_freq)
        spatial_attended, spatial_weights = self._attend(
            f_spa, f_freq, self.spatial_value, self.spatial_proj
        )
        frequency_attended, frequency_weights = self._attend(
            f_freq, f_spa, self.frequency_value, self.frequency_proj
        )
        if internals is not None:
            internals[f"{tag}.attention_spatial"] = spatial_weights.detach()
            internals[f"{tag}.attention_frequency"] = frequency_weights.detach()
            internals[f"{tag}.spatial_attended"] = spatial_attended.detach()
            internals[f"{tag}.frequency_attended"] = frequency_attended.detach()
        fused = self.select(spatial_attended, frequency_attended, internals, f"{tag}.select")
        return BranchPair(spatial=fused, frequency=frequency_attended)
