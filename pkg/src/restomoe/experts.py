"""Prior-guided per-pixel expert collaboration.

A cross-attention fusion turns the global degradation prior into a
position-aware map; a router scores N specialized experts per pixel; the
top-K of them plus an always-selected shared expert process each pixel's
channel vector, and their weighted sum is fused back through a gated
transformer block and channel cross-attention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Module,
    Tensor,
    add,
    concat,
    gather_rows,
    gelu,
    mul,
    reshape,
    scatter_rows,
    softmax_axis,
    take_slots,
    transpose,
    tsum,
)
from .blocks import ChannelAttention, MdtaConfig, TokenCrossAttention
from .gating import GatedTransformerBlock, MstConfig
from .layers import DepthwiseConv3x3, LayerNormChannel, Linear, PointwiseConv
from .priors import PriorBundle, PriorProviderConfig


class PixelExpert(Module):
    """Two-layer channel network C -> 2C -> C applied to [M, C] pixel rows."""

    def __init__(self, channels: int, rng: np.random.Generator):
        self.fc1 = Linear(channels, 2 * channels, rng)
        self.fc2 = Linear(2 * channels, channels, rng)

    def forward(self, rows: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(rows)))


class ExpertLibrary(Module):
    """N specialized experts plus one shared expert, all C -> C."""

    def __init__(self, channels: int, num_experts: int, rng: np.random.Generator):
        self.specialized = [PixelExpert(channels, rng) for _ in range(num_experts)]
        self.shared = PixelExpert(channels, rng)
        self.channels = channels
        self.num_experts = num_experts

    def expert(self, index: int) -> PixelExpert:
        """Index N addresses the shared expert; 0..N-1 the specialized ones."""
        if index == self.num_experts:
            return self.shared
        if 0 <= index < self.num_experts:
            return self.specialized[index]
        raise IndexError(f"expert index {index} out of range for N={self.num_experts}")


@dataclass
class RoutingDecision:
    """Per-pixel selected expert slots: ids [B,K+1,H,W] (value N = shared)
    and the softmax weights at those slots (differentiable)."""

    ids: np.ndarray
    weights: Tensor
    num_experts: int


@dataclass
class RoutingStats:
    """Router health: confidence map (specialized scores, differentiable)
    and the binary selection tensor with the shared expert excluded."""

    confidence: Tensor  # [B, N, H, W]
    selection: np.ndarray  # [B, N, H, W] in {0, 1}
    top_k: int

    def weight_totals(self) -> Tensor:
        """W_n: per-expert sum of routing confidence over batch and space."""
        return tsum(self.confidence, axis=(0, 2, 3))

    def selection_totals(self) -> np.ndarray:
        """S_n: per-expert hard selection counts over batch and space."""
        return self.selection.sum(axis=(0, 2, 3)).astype(np.float64)

    def selection_cv(self) -> float:
        """Coefficient of variation of the selection counts."""
        s = self.selection_totals()
        m = s.mean()
        return float(s.std() / m) if m > 0 else 0.0


class PriorFusion(Module):
    """Cross-attention fusion of the degradation prior with the feature map.

    The concatenated prior vector is projected into a small set of C-dim
    tokens; each pixel of the feature map attends over them, giving a
    position-aware degradation map of the same spatial shape.
    """

    def __init__(self, channels: int, prior_cfg: PriorProviderConfig, rng: np.random.Generator):
        d_p = prior_cfg.d_f + prior_cfg.d_s
        self.token_proj = Linear(d_p, prior_cfg.tokens * channels, rng)  # W_p^1
        self.cross = TokenCrossAttention(channels, rng)
        self.out_proj = PointwiseConv(channels, channels, rng)  # W_p^2
        self.channels = channels
        self.tokens = prior_cfg.tokens
        self.d_p = d_p

    def forward(self, prior: PriorBundle, xhat: Tensor) -> Tensor:
        pvec = concat([prior.features, prior.similarity], axis=1)
        if pvec.shape[1] != self.d_p:
            raise ValueError(f"prior dim {pvec.shape[1]} != configured {self.d_p}")
        B = pvec.shape[0]
        tokens = reshape(self.token_proj(pvec), (B, self.tokens, self.channels))
        return self.out_proj(self.cross(xhat, tokens))


class Router(Module):
    """Per-pixel routing probabilities over the specialized experts."""

    def __init__(self, channels: int, num_experts: int, rng: np.random.Generator):
        self.norm = LayerNormChannel(channels)
        self.proj = PointwiseConv(2 * channels, num_experts, rng)  # W_r
        self.num_experts = num_experts

    def forward(self, prior_map: Tensor, xhat: Tensor) -> Tensor:
        if prior_map.shape != xhat.shape:
            raise ValueError(f"prior map {prior_map.shape} != features {xhat.shape}")
        logits = self.proj(concat([prior_map, self.norm(xhat)], axis=1))
        return softmax_axis(logits, axis=1)


def select_experts(score: Tensor, top_k: int) -> RoutingDecision:
    """Keep the K highest-scoring specialized experts plus the shared expert.

    A fixed high-confidence score of 1 is appended for the shared slot and
    the whole (N+1)-vector re-softmaxed; weights are the softmax values at
    the selected slots. Ties break toward the shared slot, then the lower
    expert index. Selection itself carries no gradient.
    """
    B, N, H, W = score.shape
    if not 1 <= top_k <= N:
        raise ValueError(f"top_k={top_k} out of range for N={N}")
    ones = Tensor(np.ones((B, 1, H, W), dtype=np.float32))
    probs = softmax_axis(concat([score, ones], axis=1), axis=1)

    pref = np.concatenate([[N], np.arange(N)])  # shared first, then ascending
    reordered = probs.data[:, pref]
    order = np.argsort(-reordered, axis=1, kind="stable")
    ids = pref[order[:, : top_k + 1]]
    weights = take_slots(probs, ids)
    return RoutingDecision(ids=ids, weights=weights, num_experts=N)


def routing_stats(score: Tensor, decision: RoutingDecision) -> RoutingStats:
    B, N, H, W = score.shape
    marks = np.zeros((B, N + 1, H, W), dtype=np.uint8)
    np.put_along_axis(marks, decision.ids, 1, axis=1)
    return RoutingStats(confidence=score, selection=marks[:, :N], top_k=decision.ids.shape[1] - 1)


def aggregate_experts(xhat: Tensor, decision: RoutingDecision, library: ExpertLibrary) -> Tensor:
    """Sparse per-pixel mixture: sum_k weight_k * E_{id_k}(pixel channels).

    Each expert runs only on the pixels routed to it (gather / scatter-add);
    gradients flow through both the expert paths and the routing weights.
    """
    B, C, H, W = xhat.shape
    N = decision.num_experts
    if decision.ids.min() < 0 or decision.ids.max() > N:
        raise IndexError(f"expert ids outside 0..{N}")
    L = B * H * W
    flat = reshape(transpose(xhat, (0, 2, 3, 1)), (L, C))
    acc = None
    for e in range(N + 1):
        slot_mask = (decision.ids == e)
        pixel_idx = np.flatnonzero(slot_mask.any(axis=1).reshape(-1))
        if pixel_idx.size == 0:
            continue
        w_map = tsum(mul(decision.weights, Tensor(slot_mask.astype(np.float32))), axis=1)
        w_rows = gather_rows(reshape(w_map, (L, 1)), pixel_idx)
        rows = gather_rows(flat, pixel_idx)
        contrib = scatter_rows(mul(library.expert(e)(rows), w_rows), pixel_idx, L)
        acc = contrib if acc is None else add(acc, contrib)
    return transpose(reshape(acc, (B, H, W, C)), (0, 3, 1, 2))


class ExpertRefiner(Module):
    """Full collaboration module inserted between decoder stages.

    Pipeline: prior fusion -> routing -> top-(K+1) selection -> sparse
    aggregation -> depthwise conv + gated transformer fusion -> channel
    cross-attention against the original features.
    """

    def __init__(
        self,
        channels: int,
        num_experts: int,
        top_k: int,
        prior_cfg: PriorProviderConfig,
        rng: np.random.Generator,
    ):
        if top_k > num_experts:
            raise ValueError(f"top_k {top_k} exceeds expert count {num_experts}")
        self.prior_fusion = PriorFusion(channels, prior_cfg, rng)
        self.router = Router(channels, num_experts, rng)
        self.library = ExpertLibrary(channels, num_experts, rng)
        self.fuse_dw = DepthwiseConv3x3(channels, rng)  # W_d'
        self.fuse_block = GatedTransformerBlock(MstConfig(channels, heads=1), rng)
        self.cross = ChannelAttention(MdtaConfig(channels, heads=1), rng)
        self.top_k = top_k

    def forward(self, xhat: Tensor, prior: PriorBundle) -> tuple[Tensor, RoutingStats]:
        prior_map = self.prior_fusion(prior, xhat)
        score = self.router(prior_map, xhat)
        decision = select_experts(score, self.top_k)
        mixed = aggregate_experts(xhat, decision, self.library)
        fused = self.fuse_block(self.fuse_dw(mixed))
        out = self.cross(xhat, context=fused)
        return out, routing_stats(score, decision)
