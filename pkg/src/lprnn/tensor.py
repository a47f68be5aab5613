"""Dense 2-D tensor primitives.

Tensors are plain 2-D numpy arrays (row-major, ``float32`` for model state).
Gradient-check code passes ``float64`` arrays through the same functions.
"""

import numpy as np

from . import kernels

DTYPE = np.float32


class ShapeError(ValueError):
    pass


def as_tensor(x, dtype=None):
    arr = np.asarray(x, dtype=dtype if dtype is not None else None)
    if arr.dtype.kind not in "f":
        arr = arr.astype(DTYPE)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D tensor, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def matmul(a, b):
    """Matrix product with a fixed left-to-right accumulation order.

    See :mod:`lprnn.kernels` for the exact ordering guarantee.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        b = b.astype(a.dtype)
    return kernels.matmul(a, b)


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def sigmoid(x):
    # Split by sign so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elementwise(op, *args):
    """Apply ``op`` in {'add', 'mul', 'sigmoid', 'tanh', 'scale'} per element.

    ``scale`` takes ``(tensor, factor)``; the binary ops take two tensors of
    identical shape.
    """
    if op in ("add", "mul"):
        a, b = args
        _same_shape(a, b, op)
        return a + b if op == "add" else a * b
    if op == "sigmoid":
        return sigmoid(args[0])
    if op == "tanh":
        return np.tanh(args[0])
    if op == "scale":
        x, factor = args
        return x * x.dtype.type(factor)
    raise ValueError(f"unknown elementwise op {op!r}")


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_xent(logits, targets):
    """Mean cross-entropy (natural log) and its gradient w.r.t. ``logits``.

    Returns ``(loss, grad)`` where ``grad = (softmax - onehot) / batch``.
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    batch, vocab = logits.shape
    if targets.shape[0] != batch:
        raise ShapeError(f"softmax_xent: {batch} rows but {targets.shape[0]} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise IndexError(f"target index out of range for vocab of {vocab}")
    logp = log_softmax(logits)
    rows = np.arange(batch)
    loss = -logp[rows, targets].sum(dtype=np.float64) / batch
    grad = np.exp(logp)
    grad[rows, targets] -= 1
    grad /= batch
    return float(loss), grad


class SeededRng:
    """Deterministic generator (PCG64) keyed by a 64-bit seed."""

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, shape, dtype=DTYPE):
        return self._gen.uniform(low, high, size=shape).astype(dtype)

    def integers(self, high, size):
        return self._gen.integers(0, high, size=size)


def init_uniform(rng, fan_in, shape, dtype=DTYPE):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape, dtype=dtype)
