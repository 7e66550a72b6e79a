"""Degradation-prior providers for the expert router.

Two interchangeable sources produce the same PriorBundle shape: an oracle
that embeds known degradation labels through a seeded table, and a small
learnable convolutional encoder that infers them from the degraded image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Module, Tensor, gelu, reshape, softmax_axis, tmean
from .layers import Conv3x3, Linear

KINDS = ("noise", "rain", "haze", "blur", "lowlight", "snow")


@dataclass
class DegradationLabel:
    """Which degradations an image carries; empty mapping means clean."""

    intensities: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for kind, level in self.intensities.items():
            if kind not in KINDS:
                raise ValueError(f"unknown degradation kind {kind!r}")
            if not 0.0 <= level <= 1.0:
                raise ValueError(f"intensity for {kind} out of [0,1]: {level}")

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(self.intensities)

    def is_clean(self) -> bool:
        return not self.intensities


@dataclass
class PriorProviderConfig:
    mode: str = "oracle"  # oracle | learned
    d_f: int = 16
    kinds: tuple[str, ...] = ("noise", "rain", "haze")
    embed_seed: int = 0
    tokens: int = 4  # prior tokens formed by the fusion projection

    def __post_init__(self):
        if self.mode not in ("oracle", "learned"):
            raise ValueError(f"unknown prior mode {self.mode!r}")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown degradation kind {k!r}")

    @property
    def d_s(self) -> int:
        return len(self.kinds)


@dataclass
class PriorBundle:
    """Router context: degradation features [B,d_f] + similarity simplex [B,d_s]."""

    features: Tensor
    similarity: Tensor

    def __post_init__(self):
        sim = self.similarity.data
        if sim.min() < 0 or np.abs(sim.sum(axis=-1) - 1.0).max() > 1e-6:
            raise ValueError("similarity rows must be non-negative and sum to 1")


def _embedding_table(cfg: PriorProviderConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.embed_seed)
    return rng.standard_normal((len(cfg.kinds), cfg.d_f)).astype(np.float32)


def oracle_prior(labels: DegradationLabel | list[DegradationLabel], cfg: PriorProviderConfig) -> PriorBundle:
    """Idealized prior from ground-truth labels; deterministic given cfg.embed_seed.

    Similarity is the intensity vector normalized onto the simplex; clean
    images (and all-zero intensities) map to the uniform maximum-entropy
    vector, a documented convention. Features sum seeded embedding rows over
    the present kinds.
    """
    if isinstance(labels, DegradationLabel):
        labels = [labels]
    table = _embedding_table(cfg)
    feats = np.zeros((len(labels), cfg.d_f), dtype=np.float32)
    sims = np.zeros((len(labels), cfg.d_s), dtype=np.float32)
    for i, label in enumerate(labels):
        for kind in label.kinds:
            if kind not in cfg.kinds:
                raise ValueError(f"label kind {kind!r} not in configured set {cfg.kinds}")
        present = [cfg.kinds.index(k) for k in label.kinds]
        if present:
            feats[i] = table[present].sum(axis=0)
            weights = np.array([label.intensities[cfg.kinds[j]] for j in present], dtype=np.float32)
            if weights.sum() > 0:
                sims[i, present] = weights / weights.sum()
            else:
                sims[i, present] = 1.0 / len(present)
        else:
            sims[i] = 1.0 / cfg.d_s
    return PriorBundle(Tensor(feats), Tensor(sims))


class PriorEncoder(Module):
    """3-layer strided-equivalent conv encoder inferring priors from the image.

    Each stage is a 3x3 conv + gelu + 2x2 average pool; a global average
    pool feeds the feature and similarity heads. Trained jointly with the
    restoration objective (optionally with a label cross-entropy).
    """

    def __init__(self, cfg: PriorProviderConfig, rng: np.random.Generator):
        self.conv1 = Conv3x3(3, 8, rng)
        self.conv2 = Conv3x3(8, 16, rng)
        self.conv3 = Conv3x3(16, 32, rng)
        self.feat_head = Linear(32, cfg.d_f, rng)
        self.sim_head = Linear(32, cfg.d_s, rng)
        self.cfg = cfg

    @staticmethod
    def _pool2(x: Tensor) -> Tensor:
        B, C, H, W = x.shape
        return tmean(reshape(x, (B, C, H // 2, 2, W // 2, 2)), axis=(3, 5))

    def forward(self, image: Tensor) -> PriorBundle:
        B, C, H, W = image.shape
        if H < 16 or W < 16:
            raise ValueError(f"prior encoder needs at least 16x16 input, got {H}x{W}")
        y = self._pool2(gelu(self.conv1(image)))
        y = self._pool2(gelu(self.conv2(y)))
        y = self._pool2(gelu(self.conv3(y)))
        pooled = tmean(y, axis=(2, 3))  # [B, 32]
        feats = self.feat_head(pooled)
        sim = softmax_axis(self.sim_head(pooled), axis=1)
        return PriorBundle(feats, sim)
