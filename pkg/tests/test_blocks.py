"""Channel attention and gated feed-forward: contracts and gradient checks."""

import numpy as np
import pytest

from restomoe.autodiff import Tensor, backward, finite_diff_check, mul, tsum
from restomoe.blocks import (
    ChannelAttention,
    GatedFeedForward,
    GdfnConfig,
    MdtaConfig,
    TokenCrossAttention,
)

SEEDS = [0, 1, 2]
GRAD_TOL = 1e-3


def randn(rng, *shape):
    return rng.standard_normal(shape).astype(np.float32)


def test_mdta_config_rejects_indivisible_heads():
    with pytest.raises(ValueError, match="not divisible"):
        MdtaConfig(channels=6, heads=4)


def test_attention_preserves_shape():
    rng = np.random.default_rng(0)
    blk = ChannelAttention(MdtaConfig(8, 2), rng)
    x = Tensor(randn(rng, 1, 8, 8, 8))
    assert blk(x).shape == (1, 8, 8, 8)


def test_attention_rows_stochastic():
    rng = np.random.default_rng(0)
    blk = ChannelAttention(MdtaConfig(8, 2), rng)
    x = Tensor(randn(rng, 1, 8, 8, 8))
    _, attn = blk(x, return_attention=True)
    assert attn.data.min() >= 0.0
    np.testing.assert_allclose(attn.data.sum(axis=3), 1.0, atol=1e-6)


def test_attention_channel_mismatch():
    rng = np.random.default_rng(0)
    blk = ChannelAttention(MdtaConfig(8, 2), rng)
    with pytest.raises(ValueError, match="channels"):
        blk(Tensor(np.zeros((1, 4, 4, 4), dtype=np.float32)))


@pytest.mark.parametrize("seed", SEEDS)
def test_attention_gradient(seed):
    rng = np.random.default_rng(seed)
    blk = ChannelAttention(MdtaConfig(4, 1), rng)
    x = Tensor(randn(rng, 1, 4, 4, 4), requires_grad=True)
    r = Tensor(rng.choice([-1.0, 1.0], size=(1, 4, 4, 4)).astype(np.float32))
    assert finite_diff_check(lambda t: tsum(mul(blk(t), r)), x) < GRAD_TOL


def test_temperature_receives_gradient():
    rng = np.random.default_rng(0)
    blk = ChannelAttention(MdtaConfig(8, 2), rng)
    x = Tensor(randn(rng, 1, 8, 4, 4))
    backward(tsum(mul(blk(x), blk(x))))
    assert blk.temperature.grad is not None
    assert np.abs(blk.temperature.grad).max() > 0


@pytest.mark.parametrize("seed", SEEDS)
def test_temperature_gradient_check(seed):
    rng = np.random.default_rng(seed)
    blk = ChannelAttention(MdtaConfig(4, 2), rng)
    x = Tensor(randn(rng, 1, 4, 4, 4))
    r = Tensor(rng.choice([-1.0, 1.0], size=(1, 4, 4, 4)).astype(np.float32))
    assert finite_diff_check(lambda t: tsum(mul(blk(x), r)), blk.temperature) < GRAD_TOL


def test_gdfn_hidden_width_rounds():
    assert GdfnConfig(8, 2.66).hidden == 21  # round(8 * 2.66)
    assert GdfnConfig(1, 0.1).hidden == 1  # floor at one channel


def test_gdfn_preserves_shape():
    rng = np.random.default_rng(0)
    blk = GatedFeedForward(GdfnConfig(8), rng)
    x = Tensor(randn(rng, 2, 8, 4, 4))
    assert blk(x).shape == (2, 8, 4, 4)


def test_gdfn_zero_out_proj_gives_zero():
    rng = np.random.default_rng(0)
    blk = GatedFeedForward(GdfnConfig(8), rng)
    blk.out_proj.w.data[:] = 0.0
    blk.out_proj.b.data[:] = 0.0
    x = Tensor(randn(rng, 1, 8, 4, 4))
    assert np.abs(blk(x).data).max() == 0.0


@pytest.mark.parametrize("seed", SEEDS)
def test_gdfn_gradient(seed):
    rng = np.random.default_rng(seed)
    blk = GatedFeedForward(GdfnConfig(4), rng)
    x = Tensor(randn(rng, 1, 4, 4, 4), requires_grad=True)
    r = Tensor(rng.choice([-1.0, 1.0], size=(1, 4, 4, 4)).astype(np.float32))
    assert finite_diff_check(lambda t: tsum(mul(blk(t), r)), x) < GRAD_TOL


def test_token_cross_attention_shape():
    rng = np.random.default_rng(0)
    blk = TokenCrossAttention(8, rng)
    x = Tensor(randn(rng, 2, 8, 4, 4))
    tokens = Tensor(randn(rng, 2, 5, 8))
    assert blk(x, tokens).shape == (2, 8, 4, 4)


@pytest.mark.parametrize("seed", SEEDS)
def test_token_cross_attention_gradient(seed):
    rng = np.random.default_rng(seed)
    blk = TokenCrossAttention(4, rng)
    x = Tensor(randn(rng, 1, 4, 4, 4), requires_grad=True)
    tokens = Tensor(randn(rng, 1, 3, 4), requires_grad=True)
    r = Tensor(rng.choice([-1.0, 1.0], size=(1, 4, 4, 4)).astype(np.float32))
    assert finite_diff_check(lambda t: tsum(mul(blk(t, tokens), r)), x) < GRAD_TOL
    assert finite_diff_check(lambda t: tsum(mul(blk(x, t), r)), tokens) < GRAD_TOL


def test_cross_attention_uses_context_values():
    # with zeroed V projections of the context, output collapses to out_proj bias
    rng = np.random.default_rng(0)
    blk = ChannelAttention(MdtaConfig(4, 1), rng)
    x = Tensor(randn(rng, 1, 4, 4, 4))
    ctx = Tensor(np.zeros((1, 4, 4, 4), dtype=np.float32))
    out_self = blk(x).data
    out_cross = blk(x, context=ctx).data
    assert np.abs(out_self - out_cross).max() > 1e-6
