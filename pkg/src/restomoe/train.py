"""Training loop, evaluation, and routing-stats reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, add, backward, log, mul, neg, no_grad, scale, tmean, tsum
from .checkpoint import save_checkpoint
from .data import ImagePair
from .experts import RoutingStats
from .losses import LossReport, LossWeights, total_loss
from .metrics import psnr, ssim
from .model import ModelConfig, RestorationNet
from .optim import AdamW, WarmupCosine
from .priors import oracle_prior


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class TrainConfig:
    crop: int = 64
    batch: int = 2
    steps: int = 600
    lr_init: float = 2e-4
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-4
    warmup_steps: int = 50
    lr_min: float = 1e-6
    flip: bool = True
    rotate: bool = True
    seed: int = 0
    lambda1: float = 0.01
    lambda2: float = 0.1
    charb_eps: float = 1e-3
    balance_eps: float = 1e-8
    cv_squared: bool = False
    checkpoint_every: int = 0  # 0 = final checkpoint only
    prior_ce_weight: float = 0.1  # auxiliary label cross-entropy (learned prior)

    def __post_init__(self):
        if not _is_pow2(self.crop):
            raise ValueError(f"crop must be a power of two, got {self.crop}")
        if self.steps < self.warmup_steps:
            raise ValueError("steps must be at least warmup_steps")
        if self.batch < 1:
            raise ValueError("batch must be positive")

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            charb_eps=self.charb_eps,
            balance_eps=self.balance_eps,
            cv_squared=self.cv_squared,
        )


class NanLossError(RuntimeError):
    def __init__(self, component: str, step: int):
        super().__init__(f"non-finite {component} loss at step {step}")
        self.component = component
        self.step = step


def _sample_batch(pairs: list[ImagePair], tc: TrainConfig, rng: np.random.Generator):
    idx = rng.integers(0, len(pairs), size=tc.batch)
    xs, ys, labels = [], [], []
    for i in idx:
        pair = pairs[int(i)]
        _, h, w = pair.clean.shape
        if tc.crop > h or tc.crop > w:
            raise ValueError(f"crop {tc.crop} exceeds image size {h}x{w}")
        oy = int(rng.integers(0, h - tc.crop + 1))
        ox = int(rng.integers(0, w - tc.crop + 1))
        clean = pair.clean[:, oy : oy + tc.crop, ox : ox + tc.crop]
        degraded = pair.degraded[:, oy : oy + tc.crop, ox : ox + tc.crop]
        if tc.flip and rng.random() < 0.5:
            clean = clean[:, :, ::-1]
            degraded = degraded[:, :, ::-1]
        if tc.rotate:
            k = int(rng.integers(0, 4))
            if k:
                clean = np.rot90(clean, k, axes=(1, 2))
                degraded = np.rot90(degraded, k, axes=(1, 2))
        xs.append(np.ascontiguousarray(degraded))
        ys.append(np.ascontiguousarray(clean))
        labels.append(pair.label)
    return Tensor(np.stack(xs)), Tensor(np.stack(ys)), labels


def _check_finite(report: LossReport, step: int) -> None:
    for component in ("charbonnier", "balance", "fft", "total"):
        if not math.isfinite(getattr(report, component)):
            raise NanLossError(component, step)


@dataclass
class TrainResult:
    metrics: list[str]
    checkpoint_path: Path | None
    final_report: LossReport | None = None


def train(
    model: RestorationNet,
    pairs: list[ImagePair],
    tc: TrainConfig,
    out_dir: str | Path | None = None,
    log_fn=None,
) -> TrainResult:
    """Optimize the model on the dataset; deterministic for a fixed seed
    and thread count. Writes metrics.log and checkpoint.bin under out_dir."""
    if not pairs:
        raise ValueError("dataset is empty")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(tc.seed)
    weights = tc.loss_weights()
    opt = AdamW(
        model.parameters(),
        lr=tc.lr_init,
        betas=tc.betas,
        weight_decay=tc.weight_decay,
    )
    sched = WarmupCosine(tc.lr_init, tc.warmup_steps, tc.steps, tc.lr_min)
    prior_cfg = model.cfg.prior
    learned = prior_cfg.mode == "learned"

    metrics: list[str] = []
    report = None
    ckpt_path = out / "checkpoint.bin" if out is not None else None
    for step in range(tc.steps):
        x, y, labels = _sample_batch(pairs, tc, rng)
        if learned:
            bundle = model.prior_encoder(x)
        else:
            bundle = oracle_prior(labels, prior_cfg)
        restored, stats = model(x, bundle)
        report = total_loss(restored, y, stats, weights)
        _check_finite(report, step)

        objective = report.tensor
        if learned and tc.prior_ce_weight > 0:
            target = oracle_prior(labels, prior_cfg).similarity
            ce = neg(tmean(tsum(mul(target, log(add(bundle.similarity, Tensor(np.float32(1e-8))))), axis=1)))
            objective = add(objective, scale(ce, tc.prior_ce_weight))

        opt.zero_grad()
        backward(objective)
        opt.step(sched.lr(step))

        metrics.append(report.line(step))
        if log_fn is not None:
            log_fn(step, report)
        if out is not None and tc.checkpoint_every and (step + 1) % tc.checkpoint_every == 0:
            save_checkpoint(ckpt_path, model, model.cfg)

    if out is not None:
        (out / "metrics.log").write_text("\n".join(metrics) + "\n")
        save_checkpoint(ckpt_path, model, model.cfg)
    return TrainResult(metrics=metrics, checkpoint_path=ckpt_path, final_report=report)


@dataclass
class EvalRecord:
    path: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    records: list[EvalRecord]
    mean_psnr: float
    mean_ssim: float
    stats: list[RoutingStats] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"{r.path} {r.psnr:.4f} {r.ssim:.6f}" for r in self.records]
        out.append(f"mean {self.mean_psnr:.4f} {self.mean_ssim:.6f}")
        return out


def evaluate(model: RestorationNet, pairs: list[ImagePair]) -> EvalReport:
    """Full-image deterministic inference; report follows manifest order."""
    records: list[EvalRecord] = []
    skipped: list[str] = []
    last_stats: list[RoutingStats] = []
    prior_cfg = model.cfg.prior
    with no_grad():
        for pair in pairs:
            try:
                x = Tensor(pair.degraded[None])
                if prior_cfg.mode == "learned":
                    bundle = model.prior_encoder(x)
                else:
                    bundle = oracle_prior([pair.label], prior_cfg)
                restored, stats = model(x, bundle)
                out_img = np.clip(restored.data[0], 0.0, 1.0)
                records.append(
                    EvalRecord(pair.path or "<memory>", psnr(out_img, pair.clean), ssim(out_img, pair.clean))
                )
                last_stats = stats
            except ValueError as exc:
                skipped.append(f"{pair.path}: {exc}")
    if not records:
        raise ValueError("no images evaluated")
    return EvalReport(
        records=records,
        mean_psnr=float(np.mean([r.psnr for r in records])),
        mean_ssim=float(np.mean([r.ssim for r in records])),
        stats=last_stats,
        skipped=skipped,
    )


def routing_report(stats: list[RoutingStats]) -> str:
    """Plain-text per-refiner expert load summary (W_n, S_n, CV)."""
    lines = []
    for i, s in enumerate(stats):
        w = s.weight_totals().data.astype(np.float64)
        counts = s.selection_totals()
        lines.append(f"refiner {i} (top_k={s.top_k})")
        for n in range(len(counts)):
            lines.append(f"  expert {n}: W={w[n]:.4f} S={int(counts[n])}")
        w_cv = float(w.std() / w.mean()) if w.mean() > 0 else 0.0
        lines.append(f"  cv_W={w_cv:.6f} cv_S={s.selection_cv():.6f}")
    return "\n".join(lines)
