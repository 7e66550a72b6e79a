"""U-shaped restoration network assembly.

Four encoder stages of gated transformer blocks with pixel-unshuffle
downsampling (channels double per stage), four mirrored decoder stages with
pixel-shuffle upsampling and concat+1x1 skip fusion, an expert-collaboration
refiner between successive decoder stages, and a global residual from input
to output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Module, Tensor, add, concat, pixel_shuffle, pixel_unshuffle
from .experts import ExpertRefiner, RoutingStats
from .gating import GatedTransformerBlock, MstConfig
from .layers import Conv3x3, PointwiseConv, Sequential
from .priors import PriorBundle, PriorEncoder, PriorProviderConfig


@dataclass
class ModelConfig:
    base_channels: int = 16
    blocks_per_stage: tuple[int, ...] = (1, 1, 1, 2)
    heads_per_stage: tuple[int, ...] = (1, 2, 4, 8)
    experts: int = 4
    top_k: int = 2
    expansion: float = 2.66
    prior: PriorProviderConfig = field(default_factory=PriorProviderConfig)

    def __post_init__(self):
        if len(self.blocks_per_stage) != 4 or len(self.heads_per_stage) != 4:
            raise ValueError("exactly 4 stages: blocks_per_stage and heads_per_stage need 4 entries")
        if self.top_k > self.experts:
            raise ValueError(f"top_k {self.top_k} exceeds expert count {self.experts}")
        for level in range(4):
            c = self.base_channels * (2**level)
            if c % self.heads_per_stage[level]:
                raise ValueError(
                    f"stage {level}: channels {c} not divisible by heads {self.heads_per_stage[level]}"
                )

    def stage_channels(self, level: int) -> int:
        return self.base_channels * (2**level)


class RestorationNet(Module):
    """Degraded image in, restored image out (input + learned residual)."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        C = [cfg.stage_channels(l) for l in range(4)]

        def stage(level: int) -> Sequential:
            mst = MstConfig(C[level], cfg.heads_per_stage[level], cfg.expansion)
            return Sequential(
                GatedTransformerBlock(mst, rng) for _ in range(cfg.blocks_per_stage[level])
            )

        self.stem = Conv3x3(3, C[0], rng)
        self.encoders = [stage(0), stage(1), stage(2), stage(3)]
        self.downs = [PointwiseConv(C[l], C[l] // 2, rng) for l in range(3)]
        self.decoders = [stage(3), stage(2), stage(1), stage(0)]
        self.refiners = [
            ExpertRefiner(C[l], cfg.experts, cfg.top_k, cfg.prior, rng) for l in (3, 2, 1)
        ]
        self.ups = [PointwiseConv(C[l], 2 * C[l], rng) for l in (3, 2, 1)]
        self.fuses = [PointwiseConv(2 * C[l], C[l], rng) for l in (2, 1, 0)]
        self.head = Conv3x3(C[0], 3, rng)
        self.prior_encoder = PriorEncoder(cfg.prior, rng) if cfg.prior.mode == "learned" else None
        self.cfg = cfg

    def compute_prior(self, image: Tensor, prior: PriorBundle | None) -> PriorBundle:
        if prior is not None:
            return prior
        if self.prior_encoder is None:
            raise ValueError("oracle prior mode requires an explicit PriorBundle")
        return self.prior_encoder(image)

    def forward(
        self,
        image: Tensor,
        prior: PriorBundle | None = None,
        collect_gates: bool = False,
    ):
        bundle = self.compute_prior(image, prior)
        gates: list[tuple[str, Tensor]] = []
        x = self.stem(image)
        skips = []
        for level in range(4):
            for i, block in enumerate(self.encoders[level]):
                if collect_gates:
                    gates.append((f"enc{level}.{i}", block.gate_map(x)))
                x = block(x)
            if level < 3:
                skips.append(x)
                x = pixel_unshuffle(self.downs[level](x), 2)

        stats: list[RoutingStats] = []
        for d in range(4):
            x = self.decoders[d](x)
            if d < 3:
                x, stage_stats = self.refiners[d](x, bundle)
                stats.append(stage_stats)
                x = pixel_shuffle(self.ups[d](x), 2)
                x = self.fuses[d](concat([x, skips[2 - d]], axis=1))

        out = add(image, self.head(x))
        if collect_gates:
            return out, stats, gates
        return out, stats

    def encoder_gate_maps(self, image: Tensor) -> list[tuple[str, Tensor]]:
        """Gate responses of every encoder block; no prior required."""
        x = self.stem(image)
        maps = []
        for level in range(4):
            for i, block in enumerate(self.encoders[level]):
                maps.append((f"enc{level}.{i}", block.gate_map(x)))
                x = block(x)
            if level < 3:
                x = pixel_unshuffle(self.downs[level](x), 2)
        return maps


def build_model(cfg: ModelConfig, seed: int = 0) -> RestorationNet:
    return RestorationNet(cfg, seed)


def parameter_count(model: Module) -> int:
    return sum(p.data.size for _, p in model.named_parameters())
