"""Transposed channel attention and gated feed-forward blocks.

Attention is computed across the channel dimension (a CxC map per head), so
the cost is linear in pixel count. The feed-forward block gates one expanded
convolution branch with another. Both preserve [B, C, H, W].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Module,
    Parameter,
    Tensor,
    gelu,
    matmul,
    mul,
    reshape,
    scale,
    softmax_axis,
    transpose,
)
from .layers import DepthwiseConv3x3, Linear, PointwiseConv, l2_normalize_last


@dataclass
class MdtaConfig:
    channels: int
    heads: int
    temperature_init: float = 1.0

    def __post_init__(self):
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")


@dataclass
class GdfnConfig:
    channels: int
    expansion: float = 2.66

    @property
    def hidden(self) -> int:
        return max(1, round(self.channels * self.expansion))


class ChannelAttention(Module):
    """Multi-head transposed attention with a learnable per-head temperature.

    Q comes from ``x``; K and V come from ``context`` (defaults to ``x``,
    giving self-attention). Q and K are L2-normalized along the pixel axis
    before the CxC attention map is formed.
    """

    def __init__(self, cfg: MdtaConfig, rng: np.random.Generator):
        C = cfg.channels
        self.q_proj = PointwiseConv(C, C, rng)
        self.q_dw = DepthwiseConv3x3(C, rng)
        self.k_proj = PointwiseConv(C, C, rng)
        self.k_dw = DepthwiseConv3x3(C, rng)
        self.v_proj = PointwiseConv(C, C, rng)
        self.v_dw = DepthwiseConv3x3(C, rng)
        self.temperature = Parameter(
            np.full((1, cfg.heads, 1, 1), cfg.temperature_init, dtype=np.float32)
        )
        self.out_proj = PointwiseConv(C, C, rng)
        self.cfg = cfg

    def _heads(self, t: Tensor, B: int, H: int, W: int) -> Tensor:
        h = self.cfg.heads
        return reshape(t, (B, h, self.cfg.channels // h, H * W))

    def forward(self, x: Tensor, context: Tensor | None = None, return_attention: bool = False):
        if x.shape[1] != self.cfg.channels:
            raise ValueError(f"expected {self.cfg.channels} channels, got {x.shape[1]}")
        kv = x if context is None else context
        B, C, H, W = x.shape
        q = self._heads(self.q_dw(self.q_proj(x)), B, H, W)
        k = self._heads(self.k_dw(self.k_proj(kv)), B, H, W)
        v = self._heads(self.v_dw(self.v_proj(kv)), B, H, W)
        qn = l2_normalize_last(q)
        kn = l2_normalize_last(k)
        logits = mul(matmul(qn, transpose(kn, (0, 1, 3, 2))), self.temperature)
        attn = softmax_axis(logits, axis=3)  # rows sum to 1 per head
        out = matmul(attn, v)
        out = self.out_proj(reshape(out, (B, C, H, W)))
        if return_attention:
            return out, attn
        return out


class GatedFeedForward(Module):
    """Gated feed-forward: gelu(gate branch) * value branch, then projection.

    Includes its own pre-normalization; the caller adds the residual.
    """

    def __init__(self, cfg: GdfnConfig, rng: np.random.Generator):
        from .layers import LayerNormChannel

        C, Hd = cfg.channels, cfg.hidden
        self.norm = LayerNormChannel(C)
        self.gate_proj = PointwiseConv(C, Hd, rng)
        self.gate_dw = DepthwiseConv3x3(Hd, rng)
        self.value_proj = PointwiseConv(C, Hd, rng)
        self.value_dw = DepthwiseConv3x3(Hd, rng)
        self.out_proj = PointwiseConv(Hd, C, rng)
        self.cfg = cfg

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.cfg.channels:
            raise ValueError(f"expected {self.cfg.channels} channels, got {x.shape[1]}")
        y = self.norm(x)
        g = self.gate_dw(self.gate_proj(y))
        v = self.value_dw(self.value_proj(y))
        return self.out_proj(mul(gelu(g), v))


class TokenCrossAttention(Module):
    """Scaled dot-product attention of feature-map pixels over a token set.

    Query: each pixel's channel vector. Key/value: tokens [B, T, C]. The
    token set is small, so cost stays linear in pixels.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        self.q_proj = PointwiseConv(channels, channels, rng)
        self.k_proj = Linear(channels, channels, rng)
        self.v_proj = Linear(channels, channels, rng)
        self._channels = channels

    def forward(self, x: Tensor, tokens: Tensor) -> Tensor:
        B, C, H, W = x.shape
        q = transpose(reshape(self.q_proj(x), (B, C, H * W)), (0, 2, 1))  # [B, HW, C]
        k = self.k_proj(tokens)
        v = self.v_proj(tokens)
        logits = scale(matmul(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(C))
        attn = softmax_axis(logits, axis=2)  # over tokens
        ctx = matmul(attn, v)  # [B, HW, C]
        return reshape(transpose(ctx, (0, 2, 1)), (B, C, H, W))
