"""Training objectives: Charbonnier, expert load balance, and spectral loss.

The balance term penalizes dispersion of per-expert confidence totals and
selection counts via sigma / (mu^2 + eps) per sequence (a ``cv_squared``
switch changes it to sigma^2 / (mu^2 + eps)). The confidence term is
differentiable; the hard selection counts enter as a monitored constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, absolute, add, div, mul, scale, sqrt_eps, sub, tmean, tsum
from .experts import RoutingStats
from .fourier import fft2


@dataclass
class LossWeights:
    lambda1: float = 0.01  # load balance
    lambda2: float = 0.1  # spectral
    charb_eps: float = 1e-3
    balance_eps: float = 1e-8
    cv_squared: bool = False

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.charb_eps, self.balance_eps) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    """Per-step component values plus the differentiable total."""

    charbonnier: float
    balance: float
    fft: float
    total: float
    tensor: Tensor

    def line(self, step: int) -> str:
        return f"{step} {self.charbonnier:.8g} {self.balance:.8g} {self.fft:.8g} {self.total:.8g}"


def charbonnier(pred: Tensor, target: Tensor, eps: float = 1e-3) -> Tensor:
    """Smooth L1: mean over elements of sqrt(residual^2 + eps^2)."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = sub(pred, target)
    return tmean(sqrt_eps(mul(diff, diff), eps))


def _dispersion(values: Tensor, eps: float, cv_squared: bool) -> Tensor:
    mu = tmean(values)
    centered = sub(values, mu)
    var = tmean(mul(centered, centered))
    num = var if cv_squared else sqrt_eps(var, 0.0)
    return div(num, add(mul(mu, mu), Tensor(np.float32(eps))))


def _dispersion_value(values: np.ndarray, eps: float, cv_squared: bool) -> float:
    mu = float(values.mean())
    sd = float(values.std())
    num = sd * sd if cv_squared else sd
    return num / (mu * mu + eps)


def balance_loss(stats: RoutingStats, eps: float = 1e-8, cv_squared: bool = False) -> Tensor:
    """Dispersion of confidence totals (differentiable) plus selection counts
    (piecewise-constant, contributes its value only)."""
    totals = stats.weight_totals()
    if totals.size < 1:
        raise ValueError("balance_loss needs at least one expert")
    w_term = _dispersion(totals, eps, cv_squared)
    s_term = _dispersion_value(stats.selection_totals(), eps, cv_squared)
    return add(w_term, Tensor(np.float32(s_term)))


def fft_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference of the stacked real and imaginary spectra."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    re_p, im_p = fft2(pred)
    re_t, im_t = fft2(target)
    re_term = tmean(absolute(sub(re_p, re_t)))
    im_term = tmean(absolute(sub(im_p, im_t)))
    return scale(add(re_term, im_term), 0.5)


def total_loss(
    pred: Tensor,
    target: Tensor,
    stats: RoutingStats | list[RoutingStats],
    weights: LossWeights,
) -> LossReport:
    """Weighted combination; balance averages over the routing-stats list."""
    charb = charbonnier(pred, target, weights.charb_eps)
    stats_list = stats if isinstance(stats, list) else [stats]
    bal = None
    for s in stats_list:
        term = balance_loss(s, weights.balance_eps, weights.cv_squared)
        bal = term if bal is None else add(bal, term)
    bal = scale(bal, 1.0 / len(stats_list))
    spectral = fft_loss(pred, target)
    total = add(add(charb, scale(bal, weights.lambda1)), scale(spectral, weights.lambda2))
    return LossReport(
        charbonnier=charb.item(),
        balance=bal.item(),
        fft=spectral.item(),
        total=total.item(),
        tensor=total,
    )
