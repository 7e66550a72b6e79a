"""Dense float32 tensors with tape-based reverse-mode automatic differentiation.

Every block in the restoration network (channel attention, gated feed-forward,
expert routing, losses) is composed from the primitives here, so each primitive
carries its own backward rule. The tape records operations in execution order,
which is topological by construction; ``backward`` replays it once in reverse
and clears it. Layout is row-major [B, C, H, W] throughout.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy.special import erf

DTYPE = np.float32

_INV_SQRT2 = np.float32(1.0 / math.sqrt(2.0))
_INV_SQRT2PI = np.float32(1.0 / math.sqrt(2.0 * math.pi))


class precision:
    """Temporarily switch the engine's working dtype.

    Real computation is float32 throughout; finite_diff_check upgrades to
    float64 so the central-difference oracle is not drowned by forward
    rounding noise amplified by 1/(2h).
    """

    def __init__(self, dtype):
        self.dtype = dtype

    def __enter__(self):
        global DTYPE
        self._prev = DTYPE
        DTYPE = self.dtype
        return self

    def __exit__(self, *exc):
        global DTYPE
        DTYPE = self._prev
        return False


class Tensor:
    """N-dimensional float32 value with an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(np.asarray(data, dtype=DTYPE))
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; constants are wrapped as non-tracked tensors
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


class Parameter(Tensor):
    """Learnable tensor; always participates in gradient computation."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("outputs", "fn")

    def __init__(self, outputs: tuple[Tensor, ...], fn: Callable[[], None]):
        self.outputs = outputs
        self.fn = fn


class Tape:
    """Ordered record of differentiable operations.

    Invariant: every node's inputs were produced by earlier nodes (or are
    leaves), so a single reverse sweep propagates all gradients.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.recording = True

    def clear(self) -> None:
        self.nodes.clear()


_TAPE = Tape()


def tape() -> Tape:
    return _TAPE


class no_grad:
    """Context manager that suspends tape recording (inference / oracles)."""

    def __enter__(self):
        self._prev = _TAPE.recording
        _TAPE.recording = False
        return self

    def __exit__(self, *exc):
        _TAPE.recording = self._prev
        return False


def _record(inputs: Sequence[Tensor], outputs: Sequence[Tensor], fn: Callable[[], None]) -> None:
    if _TAPE.recording and any(t.requires_grad for t in inputs):
        for out in outputs:
            out.requires_grad = True
        _TAPE.nodes.append(_Node(tuple(outputs), fn))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # copy: g may alias an upstream grad buffer that later accumulates
        t.grad = np.array(np.broadcast_to(g, t.data.shape), dtype=t.data.dtype)
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar loss depends on.

    The tape is consumed: calling backward twice without rebuilding the
    graph raises.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not _TAPE.nodes:
        raise RuntimeError("backward called on an empty tape")
    loss.grad = np.ones_like(loss.data)
    try:
        for node in reversed(_TAPE.nodes):
            if any(out.grad is not None for out in node.outputs):
                node.fn()
    finally:
        _TAPE.clear()


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.ascontiguousarray(g, dtype=DTYPE)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def fn():
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    _record((a, b), (out,), fn)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def fn():
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    _record((a, b), (out,), fn)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def fn():
        g = out.grad
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    _record((a, b), (out,), fn)
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data)

    def fn():
        g = out.grad
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * out.data / b.data, b.data.shape))

    _record((a, b), (out,), fn)
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)

    def fn():
        _accum(a, -out.grad)

    _record((a,), (out,), fn)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = DTYPE(s)
    out = Tensor(a.data * s)

    def fn():
        _accum(a, out.grad * s)

    _record((a,), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# unary maps


def unary_map(x: Tensor, kind: str, eps: float | None = None) -> Tensor:
    """Elementwise map with a registered backward rule.

    kind: "sigmoid" | "gelu" | "sqrt_eps". sqrt_eps(v) = sqrt(v + eps^2)
    with the caller-supplied eps; its derivative is clamped to 0 where the
    output is 0 so eps=0 stays NaN-free.
    """
    xd = x.data
    if kind == "sigmoid":
        # stable for both tails: exp of a non-positive argument only
        e = np.exp(-np.abs(xd))
        out = Tensor(np.where(xd >= 0, 1.0 / (1.0 + e), e / (1.0 + e)))

        def fn():
            _accum(x, out.grad * out.data * (1.0 - out.data))

    elif kind == "gelu":
        phi = 0.5 * (1.0 + erf(xd * _INV_SQRT2))
        out = Tensor(xd * phi)

        def fn():
            pdf = _INV_SQRT2PI * np.exp(DTYPE(-0.5) * xd * xd)
            _accum(x, out.grad * (phi + xd * pdf).astype(DTYPE))

    elif kind == "sqrt_eps":
        if eps is None:
            raise ValueError("sqrt_eps requires eps")
        e2 = DTYPE(eps) * DTYPE(eps)
        out = Tensor(np.sqrt(xd + e2))

        def fn():
            y = out.data
            d = np.where(y > 0, DTYPE(0.5) / np.where(y > 0, y, 1), DTYPE(0))
            _accum(x, out.grad * d)

    else:
        raise ValueError(f"unknown unary kind {kind!r}")
    _record((x,), (out,), fn)
    return out


def sigmoid(x: Tensor) -> Tensor:
    return unary_map(x, "sigmoid")


def gelu(x: Tensor) -> Tensor:
    return unary_map(x, "gelu")


def sqrt_eps(x: Tensor, eps: float) -> Tensor:
    return unary_map(x, "sqrt_eps", eps=eps)


def absolute(x: Tensor) -> Tensor:
    out = Tensor(np.abs(x.data))

    def fn():
        _accum(x, out.grad * np.sign(x.data))

    _record((x,), (out,), fn)
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data))

    def fn():
        _accum(x, out.grad / x.data)

    _record((x,), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# reductions and shape ops


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def fn():
        g = out.grad
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            shape = list(x.data.shape)
            for ax in axes:
                shape[ax % x.data.ndim] = 1
            g = g.reshape(shape)
        _accum(x, np.broadcast_to(g, x.data.shape).astype(DTYPE))

    _record((x,), (out,), fn)
    return out


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= x.data.shape[ax % x.data.ndim]
    inv = DTYPE(1.0 / n)
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims, dtype=DTYPE))

    def fn():
        g = out.grad
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            shape = list(x.data.shape)
            for ax in axes:
                shape[ax % x.data.ndim] = 1
            g = g.reshape(shape)
        _accum(x, (np.broadcast_to(g, x.data.shape) * inv).astype(DTYPE))

    _record((x,), (out,), fn)
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def fn():
        _accum(x, out.grad.reshape(x.data.shape))

    _record((x,), (out,), fn)
    return out


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(np.ascontiguousarray(x.data.transpose(axes)))
    inv = np.argsort(axes)

    def fn():
        _accum(x, np.ascontiguousarray(out.grad.transpose(inv)))

    _record((x,), (out,), fn)
    return out


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]

    def fn():
        g = out.grad
        start = 0
        for t, n in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + n)
            _accum(t, np.ascontiguousarray(g[tuple(sl)]))
            start += n

    _record(tuple(tensors), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# matmul


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul expects tensors with ndim >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    out = Tensor(np.matmul(a.data, b.data))

    def fn():
        g = out.grad
        ga = np.matmul(g, b.data.swapaxes(-1, -2))
        gb = np.matmul(a.data.swapaxes(-1, -2), g)
        _accum(a, _unbroadcast(ga, a.data.shape))
        _accum(b, _unbroadcast(gb, b.data.shape))

    _record((a, b), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# softmax / layernorm


def softmax_axis(x: Tensor, axis: int) -> Tensor:
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def fn():
        g = out.grad
        sd = out.data
        dot = (g * sd).sum(axis=axis, keepdims=True)
        _accum(x, sd * (g - dot))

    _record((x,), (out,), fn)
    return out


def layernorm_channel(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-pixel normalization over the channel axis of a [B, C, H, W] map."""
    if x.data.ndim != 4:
        raise ValueError(f"layernorm_channel expects [B,C,H,W], got {x.data.shape}")
    xd = x.data
    mu = xd.mean(axis=1, keepdims=True, dtype=DTYPE)
    xc = xd - mu
    var = (xc * xc).mean(axis=1, keepdims=True, dtype=DTYPE)
    inv = 1.0 / np.sqrt(var + DTYPE(eps))
    xhat = xc * inv
    gam = gamma.data.reshape(1, -1, 1, 1)
    out = Tensor(xhat * gam + beta.data.reshape(1, -1, 1, 1))
    C = xd.shape[1]

    def fn():
        g = out.grad
        ghat = g * gam
        m1 = ghat.mean(axis=1, keepdims=True, dtype=DTYPE)
        m2 = (ghat * xhat).mean(axis=1, keepdims=True, dtype=DTYPE)
        _accum(x, (inv * (ghat - m1 - xhat * m2)).astype(DTYPE))
        _accum(gamma, (g * xhat).sum(axis=(0, 2, 3)).astype(DTYPE))
        _accum(beta, g.sum(axis=(0, 2, 3)).astype(DTYPE))

    _record((x, gamma, beta), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# convolutions (stride 1, zero padding)


def conv_pointwise(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """1x1 convolution: per-pixel channel mixing. x [B,C,H,W], w [C_out,C]."""
    if x.data.ndim != 4 or w.data.ndim != 2:
        raise ValueError(f"conv_pointwise expects x [B,C,H,W] and w [C_out,C], got {x.data.shape}, {w.data.shape}")
    B, C, H, W = x.data.shape
    if w.data.shape[1] != C:
        raise ValueError(f"conv_pointwise channel mismatch: x has {C}, w expects {w.data.shape[1]}")
    xr = x.data.reshape(B, C, H * W)
    y = np.matmul(w.data[None], xr)  # [B, C_out, HW]
    if bias is not None:
        y = y + bias.data[None, :, None]
    out = Tensor(y.reshape(B, -1, H, W))

    def fn():
        g = out.grad.reshape(B, -1, H * W)
        _accum(w, np.matmul(g, xr.swapaxes(1, 2)).sum(axis=0))
        _accum(x, np.matmul(w.data.T[None], g).reshape(B, C, H, W))
        if bias is not None:
            _accum(bias, g.sum(axis=(0, 2)))

    inputs = (x, w) if bias is None else (x, w, bias)
    _record(inputs, (out,), fn)
    return out


def conv3x3(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Dense 3x3 convolution, stride 1, zero padding 1. w [C_out,C_in,3,3]."""
    B, C, H, W = x.data.shape
    if w.data.shape[1] != C:
        raise ValueError(f"conv3x3 channel mismatch: x has {C}, w expects {w.data.shape[1]}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.zeros((B, w.data.shape[0], H, W), dtype=DTYPE)
    for ky in range(3):
        for kx in range(3):
            patch = xp[:, :, ky:ky + H, kx:kx + W].reshape(B, C, H * W)
            y += np.matmul(w.data[:, :, ky, kx][None], patch).reshape(B, -1, H, W)
    if bias is not None:
        y += bias.data[None, :, None, None]
    out = Tensor(y)

    def fn():
        g = out.grad
        gr = g.reshape(B, -1, H * W)
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w.data)
        for ky in range(3):
            for kx in range(3):
                patch = xp[:, :, ky:ky + H, kx:kx + W].reshape(B, C, H * W)
                gw[:, :, ky, kx] = np.matmul(gr, patch.swapaxes(1, 2)).sum(axis=0)
                gxp[:, :, ky:ky + H, kx:kx + W] += np.matmul(
                    w.data[:, :, ky, kx].T[None], gr
                ).reshape(B, C, H, W)
        _accum(w, gw)
        _accum(x, np.ascontiguousarray(gxp[:, :, 1:-1, 1:-1]))
        if bias is not None:
            _accum(bias, g.sum(axis=(0, 2, 3)))

    inputs = (x, w) if bias is None else (x, w, bias)
    _record(inputs, (out,), fn)
    return out


def conv_depthwise3x3(x: Tensor, w: Tensor) -> Tensor:
    """Per-channel 3x3 convolution, stride 1, zero padding 1. w [C,3,3]."""
    B, C, H, W = x.data.shape
    if w.data.shape != (C, 3, 3):
        raise ValueError(f"conv_depthwise3x3 expects w [{C},3,3], got {w.data.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.zeros(x.data.shape, dtype=DTYPE)
    tmp = np.empty_like(y)
    for ky in range(3):
        for kx in range(3):
            np.multiply(w.data[None, :, ky, kx, None, None], xp[:, :, ky:ky + H, kx:kx + W], out=tmp)
            y += tmp
    out = Tensor(y)

    def fn():
        g = out.grad
        gxp = np.zeros_like(xp)
        gw = np.empty_like(w.data)
        tmp = np.empty_like(g)
        for ky in range(3):
            for kx in range(3):
                np.multiply(g, xp[:, :, ky:ky + H, kx:kx + W], out=tmp)
                gw[:, ky, kx] = tmp.sum(axis=(0, 2, 3))
                np.multiply(w.data[None, :, ky, kx, None, None], g, out=tmp)
                gxp[:, :, ky:ky + H, kx:kx + W] += tmp
        _accum(w, gw)
        _accum(x, np.ascontiguousarray(gxp[:, :, 1:-1, 1:-1]))

    _record((x, w), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# pixel shuffle / unshuffle (lossless space<->channel rearrangement)


def _unshuffle_arr(a: np.ndarray, r: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C, H // r, r, W // r, r)
    a = a.transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(a.reshape(B, C * r * r, H // r, W // r))


def _shuffle_arr(a: np.ndarray, r: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C // (r * r), r, r, H, W)
    a = a.transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(a.reshape(B, C // (r * r), H * r, W * r))


def pixel_unshuffle(x: Tensor, r: int = 2) -> Tensor:
    B, C, H, W = x.data.shape
    if H % r or W % r:
        raise ValueError(f"pixel_unshuffle: spatial dims {H}x{W} not divisible by {r}")
    out = Tensor(_unshuffle_arr(x.data, r))

    def fn():
        _accum(x, _shuffle_arr(out.grad, r))

    _record((x,), (out,), fn)
    return out


def pixel_shuffle(x: Tensor, r: int = 2) -> Tensor:
    B, C, H, W = x.data.shape
    if C % (r * r):
        raise ValueError(f"pixel_shuffle: channel count {C} not divisible by {r * r}")
    out = Tensor(_shuffle_arr(x.data, r))

    def fn():
        _accum(x, _unshuffle_arr(out.grad, r))

    _record((x,), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# indexed gather / scatter (expert dispatch)


def take_slots(x: Tensor, idx: np.ndarray) -> Tensor:
    """Gather along the channel axis: out[b,k,h,w] = x[b, idx[b,k,h,w], h, w]."""
    out = Tensor(np.take_along_axis(x.data, idx, axis=1))

    def fn():
        gx = np.zeros_like(x.data)
        np.add.at(
            gx,
            (
                np.arange(idx.shape[0])[:, None, None, None],
                idx,
                np.arange(idx.shape[2])[None, None, :, None],
                np.arange(idx.shape[3])[None, None, None, :],
            ),
            out.grad,
        )
        _accum(x, gx)

    _record((x,), (out,), fn)
    return out


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Row gather: out = x[idx] for a [L, C] matrix and integer index vector."""
    out = Tensor(x.data[idx])

    def fn():
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, out.grad)
        _accum(x, gx)

    _record((x,), (out,), fn)
    return out


def scatter_rows(rows: Tensor, idx: np.ndarray, length: int) -> Tensor:
    """Inverse of gather_rows: place rows at idx into a zero [length, C] matrix."""
    y = np.zeros((length, rows.data.shape[1]), dtype=DTYPE)
    np.add.at(y, idx, rows.data)
    out = Tensor(y)

    def fn():
        _accum(rows, out.grad[idx])

    _record((rows,), (out,), fn)
    return out


# ---------------------------------------------------------------------------
# gradient checking oracle


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-3) -> float:
    """Max relative error of the analytic gradient against central differences.

    f must be a scalar-valued function of x built from tape primitives. The
    check runs under float64 precision so the oracle itself is accurate; the
    backward rules under test are unchanged. Relative error denominator is
    |analytic| + 1e-8.
    """
    original = x.data
    with precision(np.float64):
        x.data = original.astype(np.float64)
        x.grad = None
        loss = f(x)
        backward(loss)
        analytic = (
            x.grad.reshape(-1).astype(np.float64).copy()
            if x.grad is not None
            else np.zeros(x.data.size)
        )

        flat = x.data.reshape(-1)
        numeric = np.zeros(flat.size, dtype=np.float64)
        with no_grad():
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = f(x).item()
                flat[i] = orig - h
                fm = f(x).item()
                flat[i] = orig
                numeric[i] = (fp - fm) / (2.0 * h)
    x.data = original
    rel = np.abs(analytic - numeric) / (np.abs(analytic) + 1e-8)
    return float(rel.max())


# ---------------------------------------------------------------------------
# parameter containers


class Module:
    """Lightweight parameter container; submodules found via attribute order.

    Attribute insertion order is deterministic, so parameter names and
    iteration order are stable across runs with the same construction path.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Parameter):
                        yield f"{prefix}{name}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def trunc_normal(shape, std: float, rng: np.random.Generator) -> np.ndarray:
    """Normal(0, std) resampled until all draws fall within two deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(DTYPE)
