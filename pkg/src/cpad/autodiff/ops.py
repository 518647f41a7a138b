"""Differentiable operations: exactly what the denoising network needs.

Every op validates shapes up front, computes the forward result with numpy,
and records a backward closure returning one gradient per parent (None for
parents that do not require grad).  Broadcasting is restricted to bias-add
and per-channel scale patterns; anything else raises ShapeError.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, grad_enabled


def _result(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req and grad_enabled())
    if req and grad_enabled():
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _reduce_to(grad, shape):
    """Sum grad down to `shape`: the adjoint of numpy broadcasting."""
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_elementwise(op, a, b):
    if a.ndim != b.ndim:
        lo, hi = (a, b) if a.ndim < b.ndim else (b, a)
        bias_2d = lo.ndim == 1 and hi.ndim == 2
        chan_4d = lo.ndim == 3 and hi.ndim == 4 and lo.shape[-2:] == (1, 1)
        if not (bias_2d or chan_4d):
            raise ShapeError(op, f"rank mismatch {a.shape} vs {b.shape}; use explicit 1-dims")
    try:
        bshape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, f"incompatible shapes {a.shape} vs {b.shape}") from None
    if bshape != a.shape and bshape != b.shape:
        raise ShapeError(op, f"two-sided broadcast {a.shape} vs {b.shape} not supported")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise("add", a, b)

    def backward(g):
        return (
            _reduce_to(g, a.shape) if a.requires_grad else None,
            _reduce_to(g, b.shape) if b.requires_grad else None,
        )

    return _result(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise("mul", a, b)

    def backward(g):
        return (
            _reduce_to(g * b.data, a.shape) if a.requires_grad else None,
            _reduce_to(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _result(a.data * b.data, (a, b), backward)


def add_scalar(x: Tensor, c: float) -> Tensor:
    def backward(g):
        return (g,)

    return _result(x.data + x.dtype.type(c), (x,), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError("linear", f"x {x.shape} @ w {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError("linear", f"bias {b.shape} != ({w.shape[1]},)")
    y = x.data @ w.data
    if b is not None:
        y = y + b.data

    def backward(g):
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.T @ g if w.requires_grad else None
        gb = g.sum(axis=0) if (b is not None and b.requires_grad) else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _result(y, parents, backward)


def _im2col(xp, kh, kw, stride):
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation, NCHW, square kernel; w is (Cout, Cin, KH, KW)."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d", f"x {x.shape}, w {w.shape} must be 4-d")
    n, cin, h, wid = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError("conv2d", f"x channels {cin} != kernel channels {cin_w}")
    if b is not None and b.shape != (cout,):
        raise ShapeError("conv2d", f"bias {b.shape} != ({cout},)")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wid + 2 * padding - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError("conv2d", f"kernel {kh}x{kw} stride {stride} pad {padding} on {h}x{wid}")

    if kh == 1 and kw == 1 and stride == 1 and padding == 0:
        return _conv1x1(x, w, b)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    cols, oh, ow = _im2col(xp, kh, kw, stride)
    wm = w.data.reshape(cout, -1)
    y = np.matmul(wm, cols)
    if b is not None:
        y = y + b.data[:, None]
    y = y.reshape(n, cout, oh, ow)

    def backward(g):
        gm = g.reshape(n, cout, oh * ow)
        gw = gb = gx = None
        if w.requires_grad:
            gw = np.tensordot(gm, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
        if b is not None and b.requires_grad:
            gb = gm.sum(axis=(0, 2))
        if x.requires_grad:
            dcols = np.matmul(wm.T, gm).reshape(n, cin, kh, kw, oh, ow)
            hp, wp = h + 2 * padding, wid + 2 * padding
            dxp = np.zeros((n, cin, hp, wp), dtype=g.dtype)
            for ki in range(kh):
                for kj in range(kw):
                    dxp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += dcols[:, :, ki, kj]
            gx = dxp[:, :, padding : padding + h, padding : padding + wid] if padding else dxp
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _result(y, parents, backward)


def _conv1x1(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    n, cin, h, wid = x.shape
    cout = w.shape[0]
    xm = x.data.reshape(n, cin, h * wid)
    wm = w.data.reshape(cout, cin)
    y = np.matmul(wm, xm)
    if b is not None:
        y = y + b.data[:, None]

    def backward(g):
        gm = g.reshape(n, cout, h * wid)
        gw = gb = gx = None
        if w.requires_grad:
            gw = np.tensordot(gm, xm, axes=([0, 2], [0, 2])).reshape(w.shape)
        if b is not None and b.requires_grad:
            gb = gm.sum(axis=(0, 2))
        if x.requires_grad:
            gx = np.matmul(wm.T, gm).reshape(x.shape)
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _result(y.reshape(n, cout, h, wid), parents, backward)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, padding: int = 1) -> Tensor:
    """Per-channel convolution (groups == channels), stride 1; w is (C, 1, K, K)."""
    if x.ndim != 4 or w.ndim != 4 or w.shape[1] != 1:
        raise ShapeError("depthwise_conv2d", f"x {x.shape}, w {w.shape}")
    n, c, h, wid = x.shape
    cw, _, kh, kw = w.shape
    if cw != c:
        raise ShapeError("depthwise_conv2d", f"x channels {c} != kernel channels {cw}")
    if b is not None and b.shape != (c,):
        raise ShapeError("depthwise_conv2d", f"bias {b.shape} != ({c},)")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    oh = h + 2 * padding - kh + 1
    ow = wid + 2 * padding - kw + 1
    # accumulate shifted per-channel products: faster than windowed einsum here
    y = np.zeros((n, c, oh, ow), dtype=x.dtype)
    for ki in range(kh):
        for kj in range(kw):
            y += xp[:, :, ki : ki + oh, kj : kj + ow] * w.data[None, :, 0, ki, kj, None, None]
    if b is not None:
        y = y + b.data[None, :, None, None]

    def backward(g):
        gw = gb = gx = None
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for ki in range(kh):
                for kj in range(kw):
                    gw[:, 0, ki, kj] = np.einsum(
                        "nchw,nchw->c", g, xp[:, :, ki : ki + oh, kj : kj + ow]
                    )
        if b is not None and b.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if x.requires_grad:
            hp, wp = h + 2 * padding, wid + 2 * padding
            dxp = np.zeros((n, c, hp, wp), dtype=g.dtype)
            for ki in range(kh):
                for kj in range(kw):
                    dxp[:, :, ki : ki + oh, kj : kj + ow] += g * w.data[None, :, 0, ki, kj, None, None]
            gx = dxp[:, :, padding : padding + h, padding : padding + wid] if padding else dxp
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return _result(y, parents, backward)


def layer_norm(x: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the channel axis (axis 1) at each sample/position; no affine."""
    if x.ndim not in (2, 4):
        raise ShapeError("layer_norm", f"expected 2-d or 4-d input, got {x.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def backward(g):
        gm = g.mean(axis=1, keepdims=True)
        gxm = (g * xhat).mean(axis=1, keepdims=True)
        return ((g - gm - xhat * gxm) * inv,)

    return _result(xhat, (x,), backward)


def _stable_sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)

    def backward(g):
        return (g * s * (1.0 - s),)

    return _result(s, (x,), backward)


def silu(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)

    def backward(g):
        return (g * (s + x.data * s * (1.0 - s)),)

    return _result(x.data * s, (x,), backward)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim < 2 or not (0 <= start < stop <= x.shape[1]):
        raise ShapeError("slice_channels", f"[{start}:{stop}] on {x.shape}")

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _result(x.data[:, start:stop], (x,), backward)


def chunk2(x: Tensor) -> tuple[Tensor, Tensor]:
    """Split channels into two halves (SimpleGate input)."""
    c = x.shape[1]
    if c % 2:
        raise ShapeError("chunk2", f"odd channel count {c} in {x.shape}")
    return slice_channels(x, 0, c // 2), slice_channels(x, c // 2, c)


def concat(a: Tensor, b: Tensor, axis: int = 1) -> Tensor:
    if a.ndim != b.ndim or any(
        sa != sb for i, (sa, sb) in enumerate(zip(a.shape, b.shape)) if i != axis
    ):
        raise ShapeError("concat", f"{a.shape} + {b.shape} along axis {axis}")
    na = a.shape[axis]

    def backward(g):
        ga = np.take(g, range(na), axis=axis) if a.requires_grad else None
        gb = np.take(g, range(na, g.shape[axis]), axis=axis) if b.requires_grad else None
        return (ga, gb)

    return _result(np.concatenate([a.data, b.data], axis=axis), (a, b), backward)


def reshape(x: Tensor, shape) -> Tensor:
    def backward(g):
        return (g.reshape(x.shape),)

    return _result(x.data.reshape(shape), (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError("global_avg_pool", f"expected 4-d input, got {x.shape}")
    n, c, h, w = x.shape

    def backward(g):
        return (np.broadcast_to(g / (h * w), x.shape).copy(),)

    return _result(x.data.mean(axis=(2, 3), keepdims=True), (x,), backward)


def _shuffle(a, r):
    n, crr, h, w = a.shape
    c = crr // (r * r)
    return a.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)


def _unshuffle(a, r):
    n, c, hr, wr = a.shape
    h, w = hr // r, wr // r
    return a.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    if x.ndim != 4 or x.shape[1] % (r * r):
        raise ShapeError("pixel_shuffle", f"channels {x.shape} not divisible by r^2={r * r}")

    def backward(g):
        return (_unshuffle(g, r),)

    return _result(_shuffle(x.data, r), (x,), backward)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    if x.ndim != 4 or x.shape[2] % r or x.shape[3] % r:
        raise ShapeError("pixel_unshuffle", f"spatial dims {x.shape} not divisible by r={r}")

    def backward(g):
        return (_shuffle(g, r),)

    return _result(_unshuffle(x.data, r), (x,), backward)


def dropout(x: Tensor, p: float, training: bool, seed: int | None = None) -> Tensor:
    """Inverted dropout with a mask drawn from an explicit Philox seed."""
    if not (0.0 <= p < 1.0):
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if seed is None:
        raise ValueError("dropout in training mode requires an explicit seed")
    rng = np.random.Generator(np.random.Philox(key=seed))
    mask = (rng.random(x.shape) >= p).astype(x.dtype.type) / x.dtype.type(1.0 - p)

    def backward(g):
        return (g * mask,)

    return _result(x.data * mask, (x,), backward)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError("l1_loss", f"pred {pred.shape} != target {target.shape}")
    d = pred.data - target.data

    def backward(g):
        s = g * np.sign(d) / d.size
        return (
            s if pred.requires_grad else None,
            -s if target.requires_grad else None,
        )

    return _result(np.abs(d).mean(), (pred, target), backward)


def embedding_lookup(table: Tensor, indices) -> Tensor:
    """Row gather from an (n, d) table; gradients scatter-add into rows."""
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2 or idx.ndim != 1:
        raise ShapeError("embedding_lookup", f"table {table.shape}, indices {idx.shape}")
    if idx.min(initial=0) < 0 or (idx.size and idx.max() >= table.shape[0]):
        raise ShapeError("embedding_lookup", f"index out of range for table {table.shape}")

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _result(table.data[idx], (table,), backward)
