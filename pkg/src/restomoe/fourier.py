"""Radix-2 two-dimensional FFT with a differentiable tape op.

Spatial dims are restricted to powers of two; training crops are chosen
accordingly so no general-length transform is needed. The transform is
unnormalized (DC bin of a constant image c on HxW equals c*H*W), and the
backward pass is the conjugate transform of the output gradients.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, _accum, _record


def _cdtype():
    return np.complex64 if ad.DTYPE == np.float32 else np.complex128


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _fft1d_last(a: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT along the last axis of a complex array."""
    n = a.shape[-1]
    if n == 1:
        return a.copy()
    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    bits = n.bit_length() - 1
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = np.ascontiguousarray(a[..., rev])
    half = 1
    while half < n:
        step = half * 2
        tw = np.exp(-2j * np.pi * np.arange(half) / step).astype(a.dtype)
        blk = out.reshape(*out.shape[:-1], n // step, step)
        even = blk[..., :half].copy()
        odd = blk[..., half:] * tw
        blk[..., :half] = even + odd
        blk[..., half:] = even - odd
        half = step
    return out


def fft2_complex(a: np.ndarray) -> np.ndarray:
    """Unnormalized 2-D DFT over the trailing two axes (both powers of two)."""
    a = np.ascontiguousarray(a, dtype=_cdtype())
    a = _fft1d_last(a)
    a = _fft1d_last(a.swapaxes(-1, -2))
    return np.ascontiguousarray(a.swapaxes(-1, -2))


def ifft2_complex_unnormalized(a: np.ndarray) -> np.ndarray:
    """Unnormalized inverse DFT: sum of a[k,l] * exp(+i...); no 1/(HW) factor."""
    return np.conj(fft2_complex(np.conj(a)))


def fft2(x: Tensor) -> tuple[Tensor, Tensor]:
    """2-D DFT of each channel of a [B,C,H,W] tensor, as (real, imag) pair."""
    if x.data.ndim != 4:
        raise ValueError(f"fft2 expects [B,C,H,W], got {x.data.shape}")
    H, W = x.data.shape[-2:]
    if not (_is_pow2(H) and _is_pow2(W)):
        raise ValueError(f"fft2 requires power-of-two spatial dims, got {H}x{W}")
    spec = fft2_complex(x.data)
    re = Tensor(spec.real)
    im = Tensor(spec.imag)

    def fn():
        gr = re.grad if re.grad is not None else np.zeros_like(re.data)
        gi = im.grad if im.grad is not None else np.zeros_like(im.data)
        g = (gr + 1j * gi).astype(_cdtype())
        _accum(x, ifft2_complex_unnormalized(g).real.astype(ad.DTYPE))

    _record((x,), (re, im), fn)
    return re, im
