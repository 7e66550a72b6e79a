"""Selective gating around channel attention: the encoder/decoder workhorse.

A sigmoid mask built from a depthwise-convolved projection multiplies the
projected features before attention (mask-then-attend); a second sigmoid
gate multiplies the attention output before the final projection. The gates
attenuate degradation-carrying activations while structure passes through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Module, Tensor, add, mul, sigmoid, tmean
from .blocks import ChannelAttention, GatedFeedForward, GdfnConfig, MdtaConfig
from .layers import DepthwiseConv3x3, LayerNormChannel, PointwiseConv


@dataclass
class MstConfig:
    channels: int
    heads: int
    expansion: float = 2.66

    @property
    def mdta(self) -> MdtaConfig:
        return MdtaConfig(self.channels, self.heads)

    @property
    def gdfn(self) -> GdfnConfig:
        return GdfnConfig(self.channels, self.expansion)


class GatedAttention(Module):
    """Gated channel attention; expects a pre-normalized input map.

    proj_in / gate_proj / proj_out are the three 1x1 projections; mask_dw is
    the depthwise convolution that spatially aggregates the mask branch. Its
    bias lets tests and parameter surgery saturate the mask.
    """

    def __init__(self, channels: int, heads: int, rng: np.random.Generator):
        self.proj_in = PointwiseConv(channels, channels, rng)
        self.mask_dw = DepthwiseConv3x3(channels, rng, bias=True)
        self.attn = ChannelAttention(MdtaConfig(channels, heads), rng)
        self.gate_proj = PointwiseConv(channels, channels, rng)
        self.proj_out = PointwiseConv(channels, channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        feats = self.proj_in(x)
        mask = sigmoid(self.mask_dw(feats))
        attended = self.attn(mul(mask, feats))
        gate = sigmoid(self.gate_proj(x))
        return self.proj_out(mul(attended, gate))

    def gate_map(self, x: Tensor) -> Tensor:
        """Channel mean of the output gate, values in (0,1): [B,1,H,W]."""
        return tmean(sigmoid(self.gate_proj(x)), axis=1, keepdims=True)


class GatedTransformerBlock(Module):
    """Pre-norm gated attention plus gated feed-forward, both residual."""

    def __init__(self, cfg: MstConfig, rng: np.random.Generator):
        self.norm = LayerNormChannel(cfg.channels)
        self.msa = GatedAttention(cfg.channels, cfg.heads, rng)
        self.ffn = GatedFeedForward(cfg.gdfn, rng)
        self.cfg = cfg

    def forward(self, x: Tensor) -> Tensor:
        y = add(x, self.msa(self.norm(x)))
        return add(y, self.ffn(y))

    def gate_map(self, x: Tensor) -> Tensor:
        """Output-gate response for the raw (un-normalized) block input."""
        return self.msa.gate_map(self.norm(x))
