"""Dense-tensor reverse-mode automatic differentiation on top of numpy.

Tensors wrap float64 ndarrays and record the operations that produced them.
Calling ``backward`` on a scalar loss replays the recorded tape in reverse
topological order and accumulates gradients into every tensor reachable from
the loss that has ``requires_grad`` set. Operations whose inputs are all
constants skip the recording entirely, so inference and finite-difference
probing run at plain-numpy speed.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NonScalarLoss(ValueError):
    """backward() was called on a tensor that is not a scalar."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        if self.data.size != 1:
            raise NonScalarLoss(f"loss has shape {self.shape}, expected scalar")
        # Iterative topological sort; graphs can be thousands of nodes deep.
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _make(data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], None]) -> Tensor:
    tracked = [p for p in parents if p.requires_grad]
    out = Tensor(data)
    if tracked:
        out.requires_grad = True
        out._parents = tuple(tracked)
        out._backward = backward
    return out


# primitives --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), back)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise ShapeError("matmul requires at least 1-d operands")
    # Promote 1-d operands so one backward rule covers mat-vec and vec-mat.
    ad = a.data[None, :] if a.data.ndim == 1 else a.data
    bd = b.data[:, None] if b.data.ndim == 1 else b.data
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul mismatch: {a.shape} @ {b.shape}")
    out_data = ad @ bd
    if b.data.ndim == 1:
        out_data = out_data[..., 0]
    if a.data.ndim == 1:
        out_data = out_data[0]

    def back(g):
        gm = g
        if a.data.ndim == 1:
            gm = gm[None, ...]
        if b.data.ndim == 1:
            gm = gm[..., None]
        if a.requires_grad:
            ga = gm @ np.swapaxes(bd, -1, -2)
            a._accumulate(_unbroadcast(ga[0] if a.data.ndim == 1 else ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(ad, -1, -2) @ gm
            b._accumulate(_unbroadcast(gb[..., 0] if b.data.ndim == 1 else gb, b.shape))

    return _make(out_data, (a, b), back)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def back(g):
        a._accumulate(g * out_data)

    return _make(out_data, (a,), back)


def log(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.log(a.data)

    def back(g):
        a._accumulate(g / a.data)

    return _make(out_data, (a,), back)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def back(g):
        a._accumulate(g * 0.5 / out_data)

    return _make(out_data, (a,), back)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def back(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), back)


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = np.maximum(a.data, b.data)

    def back(g):
        # Ties route the gradient to the first operand.
        mask = a.data >= b.data
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * mask, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~mask, b.shape))

    return _make(out_data, (a, b), back)


def prelu(x, slope) -> Tensor:
    """Parametric ReLU; ``slope`` broadcasts against ``x`` (per-channel use)."""
    x, slope = as_tensor(x), as_tensor(slope)
    pos = x.data >= 0
    out_data = np.where(pos, x.data, slope.data * x.data)

    def back(g):
        if x.requires_grad:
            x._accumulate(_unbroadcast(g * np.where(pos, 1.0, slope.data * np.ones_like(x.data)), x.shape))
        if slope.requires_grad:
            slope._accumulate(_unbroadcast(g * np.where(pos, 0.0, x.data), slope.shape))

    return _make(out_data, (x, slope), back)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        x._accumulate(out_data * (g - inner))

    return _make(out_data, (x,), back)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.shape).copy())
            return
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(gg, x.shape).copy())

    return _make(out_data, (x,), back)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accumulate(g[tuple(idx)])

    return _make(out_data, parts, back)


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out_data = np.stack([p.data for p in parts], axis=axis)

    def back(g):
        for k, p in enumerate(parts):
            if p.requires_grad:
                p._accumulate(np.take(g, k, axis=axis))

    return _make(out_data, parts, back)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.reshape(shape)

    def back(g):
        x._accumulate(g.reshape(x.shape))

    return _make(out_data, (x,), back)


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    out_data = np.transpose(x.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def back(g):
        x._accumulate(np.transpose(g, inv))

    return _make(out_data, (x,), back)


def getitem(x, key) -> Tensor:
    x = as_tensor(x)
    out_data = x.data[key]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        x._accumulate(full)

    return _make(out_data, (x,), back)


def conv2d(x, w, b=None, padding: int = 0) -> Tensor:
    """2-d convolution (cross-correlation), stride 1.

    x: [C_in, H, W]; w: [C_out, C_in, kh, kw]; b: [C_out] or None.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects x[3d], w[4d]; got {x.shape}, {w.shape}")
    if x.shape[0] != w.shape[1]:
        raise ShapeError(f"conv2d channel mismatch: {x.shape} vs {w.shape}")
    cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    # windows: [C_in, H', W', kh, kw]
    out_data = np.einsum("ihwab,oiab->ohw", windows, w.data, optimize=True)
    bt = as_tensor(b) if b is not None else None
    if bt is not None:
        out_data = out_data + bt.data[:, None, None]
    parents = (x, w) if bt is None else (x, w, bt)

    def back(g):
        if bt is not None and bt.requires_grad:
            bt._accumulate(g.sum(axis=(1, 2)))
        if w.requires_grad:
            gw = np.einsum("ohw,ihwab->oiab", g, windows, optimize=True)
            w._accumulate(gw)
        if x.requires_grad:
            gp = np.pad(g, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
            gwin = np.lib.stride_tricks.sliding_window_view(gp, (kh, kw), axis=(1, 2))
            wflip = w.data[:, :, ::-1, ::-1]
            gxp = np.einsum("ohwab,oiab->ihw", gwin, wflip, optimize=True)
            if padding:
                gxp = gxp[:, padding:-padding or None, padding:-padding or None]
            x._accumulate(gxp)

    return _make(out_data, parents, back)


# gradient checking --------------------------------------------------------


def grad_check(f: Callable[[list[Tensor]], Tensor], params: Sequence[Tensor],
               step: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` must be a deterministic map from ``params`` to a scalar Tensor. The
    relative error is |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-12), maximized over
    every coordinate of every parameter.
    """
    params = list(params)
    saved_flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = True
        p.grad = None
    loss = f(params)
    loss.backward()
    ad_grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]

    for p in params:
        p.requires_grad = False

    max_err = 0.0
    for p, g_ad in zip(params, ad_grads):
        flat = p.data.reshape(-1)
        g_flat = g_ad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f(params).item()
            flat[i] = orig - step
            down = f(params).item()
            flat[i] = orig
            g_fd = (up - down) / (2.0 * step)
            err = abs(g_flat[i] - g_fd) / (abs(g_flat[i]) + abs(g_fd) + 1e-12)
            if err > max_err:
                max_err = err

    for p, flag in zip(params, saved_flags):
        p.requires_grad = flag
    return max_err
