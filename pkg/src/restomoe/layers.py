"""Parameterized layers over the autodiff primitives.

Weights are truncated-normal (std 0.02), biases zero, norm scales one;
construction order fixes parameter names and the init RNG stream.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Module,
    Parameter,
    Tensor,
    add,
    conv3x3,
    conv_depthwise3x3,
    conv_pointwise,
    div,
    layernorm_channel,
    matmul,
    mul,
    reshape,
    sqrt_eps,
    trunc_normal,
    tsum,
)

INIT_STD = 0.02


class Sequential(Module):
    """Applies contained blocks in order."""

    def __init__(self, blocks):
        self.items = list(blocks)

    def forward(self, x: Tensor) -> Tensor:
        for block in self.items:
            x = block(x)
        return x

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)


class PointwiseConv(Module):
    """1x1 convolution with optional bias."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator, bias: bool = True):
        self.w = Parameter(trunc_normal((out_ch, in_ch), INIT_STD, rng))
        self.b = Parameter(np.zeros(out_ch, dtype=np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv_pointwise(x, self.w, self.b)


class DepthwiseConv3x3(Module):
    """Per-channel 3x3 convolution; bias is added outside the primitive."""

    def __init__(self, channels: int, rng: np.random.Generator, bias: bool = False):
        self.w = Parameter(trunc_normal((channels, 3, 3), INIT_STD, rng))
        self.b = Parameter(np.zeros(channels, dtype=np.float32)) if bias else None
        self._channels = channels

    def forward(self, x: Tensor) -> Tensor:
        y = conv_depthwise3x3(x, self.w)
        if self.b is not None:
            y = add(y, reshape(self.b, (1, self._channels, 1, 1)))
        return y


class Conv3x3(Module):
    """Dense 3x3 convolution, stride 1, zero padding 1."""

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator, bias: bool = True):
        self.w = Parameter(trunc_normal((out_ch, in_ch, 3, 3), INIT_STD, rng))
        self.b = Parameter(np.zeros(out_ch, dtype=np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv3x3(x, self.w, self.b)


class Linear(Module):
    """Affine map on the last axis; weight stored as [in, out]."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.w = Parameter(trunc_normal((in_dim, out_dim), INIT_STD, rng))
        self.b = Parameter(np.zeros(out_dim, dtype=np.float32)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = matmul(x, self.w)
        return y if self.b is None else add(y, self.b)


class LayerNormChannel(Module):
    """Per-pixel layer normalization over channels with learnable affine."""

    def __init__(self, channels: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(channels, dtype=np.float32))
        self.beta = Parameter(np.zeros(channels, dtype=np.float32))
        self._eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layernorm_channel(x, self.gamma, self.beta, eps=self._eps)


def l2_normalize_last(t: Tensor, eps: float = 1e-6) -> Tensor:
    """Scale the last axis to unit L2 norm (eps-regularized at zero)."""
    sq = tsum(mul(t, t), axis=-1, keepdims=True)
    return div(t, sqrt_eps(sq, eps))
