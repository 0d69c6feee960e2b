"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array. While a :class:`GradTape` is active,
differentiable operations append nodes to it in execution order; running the
tape backwards (reverse execution order is reverse topological order) yields
gradients for every reached leaf created with ``requires_grad=True``.

Recording can be suspended with :meth:`GradTape.stop_recording`, and a single
tensor can be detached with :func:`stop_gradient`; both produce values without
tape links, which is how the one-step training rule truncates its history.

Tensors default to float32. Oracle tests build float64 tensors instead; every
operation preserves the dtype of its inputs. Reductions accumulate in float64
regardless of storage dtype.
"""

from __future__ import annotations

import contextlib
import weakref
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericError

Array = np.ndarray

_ACTIVE_TAPE: "GradTape | None" = None


class Tensor:
    """A dense n-dimensional array, optionally linked into the active tape."""

    __slots__ = ("data", "requires_grad", "_noderef")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None and not isinstance(data, (np.ndarray, np.generic)):
            dtype = np.float32
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data: Array = arr
        self.requires_grad = requires_grad
        self._noderef: weakref.ref | None = None

    @property
    def node(self) -> "TapeNode | None":
        """The recording node, held weakly: the tape owns its nodes, so a
        tensor reverts to detached once the tape is gone. Keeping the link
        weak means dropping a tape frees the whole graph by reference count
        alone (no Tensor <-> TapeNode cycles for the gc to chase)."""
        ref = self._noderef
        return ref() if ref is not None else None

    @node.setter
    def node(self, value: "TapeNode | None"):
        self._noderef = weakref.ref(value) if value is not None else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, mul(other, -1.0))
        return add(self, -float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int]) -> "Tensor":
        return transpose(self, axes)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axis=axis, keepdims=keepdims)


class TapeNode:
    """One recorded operation: output, inputs, and the rule mapping the
    output gradient to per-input gradients (``None`` for non-differentiable
    slots)."""

    __slots__ = ("out", "inputs", "backward_fn", "__weakref__")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...],
                 backward_fn: Callable[[Array], tuple[Array | None, ...]]):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


class GradTape:
    """Ordered record of operations plus, after :meth:`backward`, the
    accumulated per-parameter gradients.

    Used as a context manager::

        with GradTape() as tape:
            loss = model(x)
        grads = tape.backward(loss)
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.grads: dict[Tensor, Array] = {}
        self._recording = True
        self._used = False
        self._prev: GradTape | None = None

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    @contextlib.contextmanager
    def stop_recording(self):
        """Suspend recording; ops inside produce plain detached tensors."""
        prev = self._recording
        self._recording = False
        try:
            yield
        finally:
            self._recording = prev

    def backward(self, loss: Tensor) -> dict[Tensor, Array]:
        """Reverse sweep from a scalar loss recorded on this tape.

        Fills ``self.grads`` with d(loss)/d(leaf) for every reached leaf
        tensor that has ``requires_grad=True``. Each node is visited exactly
        once, in reverse execution (= reverse topological) order.
        """
        if loss.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        on_tape = {id(n) for n in self.nodes}
        if loss.node is None or id(loss.node) not in on_tape:
            raise ContractError("loss was not recorded on this tape")
        if self._used:
            raise ContractError("tape already consumed by a previous backward")
        self._used = True

        pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            out_grad = pending.pop(id(node.out), None)
            if out_grad is None:
                continue
            input_grads = node.backward_fn(out_grad)
            for inp, grad in zip(node.inputs, input_grads):
                if grad is None:
                    continue
                if inp.node is not None and id(inp.node) in on_tape:
                    key = id(inp)
                    if key in pending:
                        pending[key] = pending[key] + grad
                    else:
                        pending[key] = grad
                elif inp.requires_grad:
                    if inp in self.grads:
                        self.grads[inp] = self.grads[inp] + grad
                    else:
                        self.grads[inp] = grad
        return self.grads

    def grad(self, leaf: Tensor) -> Array:
        """Gradient for a leaf; exactly zero if the loss never reached it."""
        g = self.grads.get(leaf)
        if g is None:
            return np.zeros_like(leaf.data)
        return g


def active_tape() -> GradTape | None:
    return _ACTIVE_TAPE


def backward(loss: Tensor) -> dict[Tensor, Array]:
    """Backward through the active tape (see :meth:`GradTape.backward`)."""
    if _ACTIVE_TAPE is None:
        raise ContractError("backward() requires an active GradTape")
    return _ACTIVE_TAPE.backward(loss)


def record(out_data: Array, inputs: Iterable[Tensor],
           backward_fn: Callable[[Array], tuple[Array | None, ...]]) -> Tensor:
    """Wrap an op result, appending a tape node when recording is active.

    This is the single extension point custom primitives (rmsnorm, rotary)
    use; everything in this module goes through it as well.
    """
    inputs = tuple(inputs)
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE
    if tape is not None and tape._recording and any(
            i.requires_grad or i.node is not None for i in inputs):
        out.requires_grad = True
        node = TapeNode(out, inputs, backward_fn)
        out.node = node
        tape.nodes.append(node)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _sum_to_vector(grad: Array, length: int) -> Array:
    # reduce a full-shape gradient onto a trailing per-feature vector,
    # accumulating in float64
    axes = tuple(range(grad.ndim - 1))
    return np.sum(grad, axis=axes, dtype=np.float64).astype(grad.dtype)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-d tensors, or batched product of stacked matrices
    with identical leading extents."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def bwd(g: Array):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return record(out, (a, b), bwd)


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum. ``b`` may be a scalar, an equal-shape tensor, or a
    per-feature vector broadcast over the last axis."""
    a = _as_tensor(a)
    if not isinstance(b, Tensor) and np.isscalar(b):
        c = float(b)
        return record(a.data + c, (a,), lambda g: (g,))
    b = _as_tensor(b)
    if a.shape == b.shape:
        return record(a.data + b.data, (a, b), lambda g: (g, g))
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        n = b.shape[0]
        return record(a.data + b.data, (a, b),
                      lambda g: (g, _sum_to_vector(g, n)))
    raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; same operand forms as :func:`add`."""
    a = _as_tensor(a)
    if not isinstance(b, Tensor) and np.isscalar(b):
        c = float(b)
        return record(a.data * c, (a,), lambda g: (g * c,))
    b = _as_tensor(b)
    ad, bd = a.data, b.data
    if a.shape == b.shape:
        return record(ad * bd, (a, b), lambda g: (g * bd, g * ad))
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        n = b.shape[0]
        return record(ad * bd, (a, b),
                      lambda g: (g * bd, _sum_to_vector(g * ad, n)))
    raise DimensionError(f"mul shape mismatch: {a.shape} * {b.shape}")


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    x = _as_tensor(x)
    xd = x.data
    x_sq = xd * xd  # n.b. x**3 takes numpy's generic pow path, ~90x slower
    inner = _GELU_C * (xd + 0.044715 * (x_sq * xd))
    t = np.tanh(inner)

    def bwd(g: Array):
        sech2 = 1.0 - t * t
        d = 0.5 * (1.0 + t) + 0.5 * xd * sech2 * _GELU_C * (1.0 + 3 * 0.044715 * x_sq)
        return (g * d,)

    return record(0.5 * xd * (1.0 + t), (x,), bwd)


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    return record(np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    xd = x.data
    s = np.empty_like(xd)
    pos = xd >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    e = np.exp(xd[~pos])
    s[~pos] = e / (1.0 + e)
    return record(s, (x,), lambda g: (g * s * (1.0 - s),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``, computed with max subtraction."""
    x = _as_tensor(x)
    _check_axis(x, axis)
    xd = x.data
    if not np.all(np.isfinite(xd)):
        raise NumericError("softmax input contains non-finite values")
    shifted = xd - np.max(xd, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(g: Array):
        dot = np.sum(g * s, axis=axis, keepdims=True)
        return (s * (g - dot),)

    return record(s, (x,), bwd)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    _check_axis(x, axis)
    xd = x.data
    if not np.all(np.isfinite(xd)):
        raise NumericError("log_softmax input contains non-finite values")
    shifted = xd - np.max(xd, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def bwd(g: Array):
        return (g - p * np.sum(g, axis=axis, keepdims=True),)

    return record(out, (x,), bwd)


def _check_axis(x: Tensor, axis: int):
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {x.shape}")


def stop_gradient(x: Tensor) -> Tensor:
    """Same values as ``x``; contributes exactly zero gradient upstream."""
    x = _as_tensor(x)
    return Tensor(x.data)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    old = x.shape
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return record(x.data.transpose(axes), (x,),
                  lambda g: (g.transpose(inv),))


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def bwd(g: Array):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(parts)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return record(out, tuple(parts), bwd)


def broadcast_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    old = x.shape
    out = np.broadcast_to(x.data, shape)

    def bwd(g: Array):
        extra = g.ndim - len(old)
        g = np.sum(g, axis=tuple(range(extra)), dtype=np.float64)
        expanded = tuple(i for i, n in enumerate(old) if n == 1 and g.shape[i] != 1)
        if expanded:
            g = np.sum(g, axis=expanded, keepdims=True, dtype=np.float64)
        return (g.astype(x.dtype),)

    return record(np.ascontiguousarray(out), (x,), bwd)


def slice_(x: Tensor, key) -> Tensor:
    """Basic (non-advanced) indexing with gradient scatter on backward."""
    x = _as_tensor(x)
    shape = x.shape
    out = x.data[key]

    def bwd(g: Array):
        full = np.zeros(shape, dtype=g.dtype)
        full[key] = g
        return (full,)

    return record(np.ascontiguousarray(out), (x,), bwd)


def gather_classes(x: Tensor, labels: Array) -> Tensor:
    """Pick ``x[b, labels[b]]`` for each row of a 2-d tensor."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"gather_classes expects 2-d input, got {x.shape}")
    n, k = x.shape
    idx = np.asarray(labels)
    rows = np.arange(n)
    out = x.data[rows, idx]

    def bwd(g: Array):
        full = np.zeros((n, k), dtype=g.dtype)
        full[rows, idx] = g
        return (full,)

    return record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def reduce_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    shape = x.shape
    out = np.sum(x.data, axis=axes, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def bwd(g: Array):
        if not keepdims:
            kshape = tuple(1 if i in axes else n for i, n in enumerate(shape))
            g = g.reshape(kshape)
        return (np.ascontiguousarray(np.broadcast_to(g, shape)),)

    return record(out, (x,), bwd)


def reduce_mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    shape = x.shape
    count = 1
    for a in axes:
        count *= shape[a]
    out = np.mean(x.data, axis=axes, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def bwd(g: Array):
        if not keepdims:
            kshape = tuple(1 if i in axes else n for i, n in enumerate(shape))
            g = g.reshape(kshape)
        return (np.ascontiguousarray(np.broadcast_to(g / count, shape)),)

    return record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# image kernels
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor) -> Tensor:
    """3x3 cross-correlation, stride 1, zero same-padding, no bias.

    ``x`` is BxHxWxCin, ``w`` is 3x3xCinxCout. Implemented as nine shifted
    GEMMs, one per kernel offset.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d operands, got {x.shape}, {w.shape}")
    if w.shape[0] != 3 or w.shape[1] != 3:
        raise DimensionError(f"conv2d kernel must be 3x3, got {w.shape[:2]}")
    if x.shape[3] != w.shape[2]:
        raise DimensionError(
            f"conv2d channel mismatch: input has {x.shape[3]}, kernel expects {w.shape[2]}")
    b, h, wd_, cin = x.shape
    cout = w.shape[3]
    xp = np.zeros((b, h + 2, wd_ + 2, cin), dtype=x.dtype.type)
    xp[:, 1:-1, 1:-1, :] = x.data
    wdat = w.data

    out = np.zeros((b * h * wd_, cout), dtype=x.dtype.type)
    for ky in range(3):
        for kx in range(3):
            patch = xp[:, ky:ky + h, kx:kx + wd_, :].reshape(b * h * wd_, cin)
            out += patch @ wdat[ky, kx]
    out = out.reshape(b, h, wd_, cout)

    def bwd(g: Array):
        gf = g.reshape(b * h * wd_, cout)
        gw = np.zeros_like(wdat)
        gxp = np.zeros_like(xp)
        for ky in range(3):
            for kx in range(3):
                patch = xp[:, ky:ky + h, kx:kx + wd_, :].reshape(b * h * wd_, cin)
                gw[ky, kx] = patch.T @ gf
                gxp[:, ky:ky + h, kx:kx + wd_, :] += (gf @ wdat[ky, kx].T).reshape(b, h, wd_, cin)
        return gxp[:, 1:-1, 1:-1, :], gw

    return record(out, (x, w), bwd)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2. Ties route gradient to the first
    element in row-major window order."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"maxpool2d expects 4-d input, got {x.shape}")
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool2d needs even spatial extents, got {h}x{w}")
    windows = x.data.reshape(b, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    flat = np.ascontiguousarray(windows).reshape(b, h // 2, w // 2, 4, c)
    arg = np.argmax(flat, axis=3)  # first max wins
    out = np.take_along_axis(flat, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]

    def bwd(g: Array):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, arg[:, :, :, None, :], g[:, :, :, None, :], axis=3)
        gx = gflat.reshape(b, h // 2, w // 2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
        return (np.ascontiguousarray(gx).reshape(b, h, w, c),)

    return record(np.ascontiguousarray(out), (x,), bwd)


class BatchNormState:
    """Running statistics for one batchnorm layer (not learnable)."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
                mode: str) -> Tensor:
    """Per-channel batch normalization over BxHxWxC input.

    Train mode normalizes with batch statistics and updates the running
    estimates (exponential average, unbiased variance); eval mode uses the
    running estimates. Learnable parameters are gamma and beta only.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise DimensionError(f"batchnorm2d expects 4-d input, got {x.shape}")
    c = x.shape[3]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(
            f"batchnorm2d affine shape mismatch: {gamma.shape}/{beta.shape} vs {c} channels")
    if mode not in ("train", "eval"):
        raise ContractError(f"batchnorm2d mode must be 'train' or 'eval', got {mode!r}")
    n = x.shape[0] * x.shape[1] * x.shape[2]
    if mode == "train" and x.shape[0] == 0:
        raise ContractError("batchnorm2d train mode requires a non-empty batch")
    xd, gd, bd = x.data, gamma.data, beta.data

    if mode == "train":
        mean = np.mean(xd, axis=(0, 1, 2), dtype=np.float64)
        var = np.var(xd, axis=(0, 1, 2), dtype=np.float64)
        m = state.momentum
        state.running_mean = ((1 - m) * state.running_mean
                              + m * mean.astype(state.running_mean.dtype))
        unbiased = var * (n / (n - 1)) if n > 1 else var
        state.running_var = ((1 - m) * state.running_var
                             + m * unbiased.astype(state.running_var.dtype))
    else:
        mean = state.running_mean.astype(np.float64)
        var = state.running_var.astype(np.float64)

    invstd = (1.0 / np.sqrt(var + state.eps)).astype(xd.dtype)
    mean = mean.astype(xd.dtype)
    xhat = (xd - mean) * invstd
    out = gd * xhat + bd

    def bwd(g: Array):
        ggamma = np.sum(g * xhat, axis=(0, 1, 2), dtype=np.float64).astype(xd.dtype)
        gbeta = np.sum(g, axis=(0, 1, 2), dtype=np.float64).astype(xd.dtype)
        if mode == "eval":
            return g * (gd * invstd), ggamma, gbeta
        dxhat = g * gd
        s1 = np.sum(dxhat, axis=(0, 1, 2), dtype=np.float64).astype(xd.dtype)
        s2 = np.sum(dxhat * xhat, axis=(0, 1, 2), dtype=np.float64).astype(xd.dtype)
        gx = (invstd / n) * (n * dxhat - s1 - xhat * s2)
        return gx, ggamma, gbeta

    return record(out, (x, gamma, beta), bwd)


# ---------------------------------------------------------------------------
# random initialization
# ---------------------------------------------------------------------------

def truncated_normal_rng(rng: np.random.Generator, shape,
                         dtype=np.float32) -> Array:
    """Standard normal samples with rejection outside [-2, 2]."""
    x = rng.standard_normal(shape)
    mask = np.abs(x) > 2.0
    while mask.any():
        x[mask] = rng.standard_normal(int(mask.sum()))
        mask = np.abs(x) > 2.0
    return x.astype(dtype)


def truncated_normal(shape, seed: int, dtype=np.float32) -> Tensor:
    """Deterministic TN(0,1;-2,2) draw for a fixed seed."""
    rng = np.random.default_rng(seed)
    return Tensor(truncated_normal_rng(rng, shape, dtype=dtype))
