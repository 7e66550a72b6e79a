"""PSNR and SSIM for images in [0,1] (dynamic range 1)."""

from __future__ import annotations

import numpy as np

PSNR_CAP = 100.0
_MSE_FLOOR = 1e-10


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 * log10(1 / MSE), capped at 100 dB for near-identical inputs."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse < _MSE_FLOOR:
        return PSNR_CAP
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    k = np.outer(g, g)
    return (k / k.sum()).astype(np.float64)


def _windowed_mean(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    # valid-mode correlation via sliding windows; desk-scale images only
    view = np.lib.stride_tricks.sliding_window_view(x, window.shape)
    return np.tensordot(view, window, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Gaussian-windowed SSIM (11x11, sigma 1.5), mean over channels/windows."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.shape[-1] < 11 or a.shape[-2] < 11:
        raise ValueError("ssim needs at least 11x11 images")
    window = _gaussian_window()
    c1 = k1**2
    c2 = k2**2
    scores = []
    for c in range(a.shape[0]):
        x = a[c].astype(np.float64)
        y = b[c].astype(np.float64)
        mu_x = _windowed_mean(x, window)
        mu_y = _windowed_mean(y, window)
        xx = _windowed_mean(x * x, window) - mu_x**2
        yy = _windowed_mean(y * y, window) - mu_y**2
        xy = _windowed_mean(x * y, window) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))
