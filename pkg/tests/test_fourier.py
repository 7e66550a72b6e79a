"""2-D FFT: brute-force DFT oracle, Parseval, linearity, gradients."""

import numpy as np
import pytest

from restomoe.autodiff import Tensor, finite_diff_check, mul, tsum
from restomoe.fourier import fft2, fft2_complex

SEEDS = [0, 1, 2]


def naive_dft2(img: np.ndarray) -> np.ndarray:
    """O(N^2) reference DFT of a single 2-D array, unnormalized."""
    H, W = img.shape
    ky = np.arange(H)[:, None] * np.arange(H)[None, :]  # [k, m]
    kx = np.arange(W)[:, None] * np.arange(W)[None, :]
    ey = np.exp(-2j * np.pi * ky / H)
    ex = np.exp(-2j * np.pi * kx / W)
    return ey @ img.astype(np.complex128) @ ex.T


def test_constant_image_dc_only():
    c = 0.37
    x = Tensor(np.full((1, 1, 4, 4), c, dtype=np.float32))
    re, im = fft2(x)
    assert re.data[0, 0, 0, 0] == pytest.approx(16 * c, rel=1e-6)
    rest = re.data.copy()
    rest[0, 0, 0, 0] = 0.0
    assert np.abs(rest).max() < 1e-5
    assert np.abs(im.data).max() < 1e-5


@pytest.mark.parametrize("seed", SEEDS)
def test_matches_naive_dft_oracle(seed):
    rng = np.random.default_rng(seed)
    img = rng.standard_normal((8, 8)).astype(np.float32)
    re, im = fft2(Tensor(img[None, None]))
    ref = naive_dft2(img)
    assert np.abs(re.data[0, 0] - ref.real).max() < 1e-4
    assert np.abs(im.data[0, 0] - ref.imag).max() < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    img = rng.standard_normal((8, 8)).astype(np.float32)
    re, im = fft2(Tensor(img[None, None]))
    spatial = float((img.astype(np.float64) ** 2).sum())
    spectral = float((re.data.astype(np.float64) ** 2 + im.data.astype(np.float64) ** 2).sum()) / 64.0
    assert spectral == pytest.approx(spatial, rel=1e-4)


@pytest.mark.parametrize("seed", SEEDS)
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
    y = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
    a, b = 0.7, -1.3
    re_lin, im_lin = fft2(Tensor(a * x + b * y))
    re_x, im_x = fft2(Tensor(x))
    re_y, im_y = fft2(Tensor(y))
    assert np.abs(re_lin.data - (a * re_x.data + b * re_y.data)).max() < 1e-4
    assert np.abs(im_lin.data - (a * im_x.data + b * im_y.data)).max() < 1e-4


def test_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="power-of-two"):
        fft2(Tensor(np.zeros((1, 1, 6, 8))))


def test_non_square_power_of_two_ok():
    rng = np.random.default_rng(0)
    img = rng.standard_normal((4, 8)).astype(np.float32)
    re, im = fft2(Tensor(img[None, None]))
    ref = naive_dft2(img)
    assert np.abs(re.data[0, 0] - ref.real).max() < 1e-4
    assert np.abs(im.data[0, 0] - ref.imag).max() < 1e-4


def test_inverse_of_forward():
    rng = np.random.default_rng(0)
    img = rng.standard_normal((8, 8)).astype(np.complex64)
    from restomoe.fourier import ifft2_complex_unnormalized

    back = ifft2_complex_unnormalized(fft2_complex(img)) / 64.0
    assert np.abs(back - img).max() < 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_fft_gradient(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, 1, 4, 4)).astype(np.float32), requires_grad=True)
    r1 = Tensor(rng.choice([-1.0, 1.0], size=(1, 1, 4, 4)).astype(np.float32))
    r2 = Tensor(rng.choice([-1.0, 1.0], size=(1, 1, 4, 4)).astype(np.float32))

    def f(t):
        re, im = fft2(t)
        return tsum(mul(re, r1)) + tsum(mul(im, r2))

    assert finite_diff_check(f, x) < 1e-3


@pytest.mark.parametrize("seed", SEEDS)
def test_fft_gradient_real_only(seed):
    # one output branch unused: its grad stays None and is treated as zeros
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, 1, 4, 4)).astype(np.float32), requires_grad=True)

    def f(t):
        re, _ = fft2(t)
        return tsum(mul(re, re))

    assert finite_diff_check(f, x) < 1e-3
