"""k-bit uniform quantizers and their straight-through gradients.

Weights go through a tanh rescale into [-1, 1] before a uniform k-bit grid is
applied; activations are clipped to [0, 1] (``unit``) or [-1, 1]
(``symmetric``) and quantized on the same kind of grid.  ``bits == 32`` is the
identity sentinel everywhere.

Rounding is half away from zero.  Grid values are always produced by the
affine decode ``scale * code + offset`` evaluated in float64 and then cast to
the tensor dtype, which is also what :func:`lprnn.packing.unpack` does, so
packed and in-memory weights are bit-identical.
"""

from dataclasses import dataclass

import numpy as np

ALLOWED_BITS = (1, 2, 4, 8, 16, 32)
IDENTITY_BITS = 32

WEIGHT = "weight"
ACT_UNIT = "activation-unit"
ACT_SYMMETRIC = "activation-symmetric"


@dataclass(frozen=True)
class QuantSpec:
    weight_bits: int = 32
    activation_bits: int = 32

    def __post_init__(self):
        for name in ("weight_bits", "activation_bits"):
            value = getattr(self, name)
            if value not in ALLOWED_BITS:
                raise ValueError(f"{name}={value!r} not in allowed set {ALLOWED_BITS}")

    @property
    def is_identity(self):
        return self.weight_bits == IDENTITY_BITS and self.activation_bits == IDENTITY_BITS


def levels(k):
    """Number of grid steps ``2**k - 1``."""
    return (1 << k) - 1


def _check_bits(k):
    if k not in ALLOWED_BITS or k == IDENTITY_BITS:
        raise ValueError(f"quantizer bit-width must be one of {ALLOWED_BITS[:-1]}, got {k!r}")


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    mag = np.abs(x)
    fl = np.floor(mag)
    return np.copysign(fl + (mag - fl >= 0.5), x)


def unit_codes(x, k):
    """Integer grid index of ``x`` in [0, 1] on the k-bit unit grid."""
    x = np.asarray(x, dtype=np.float64)
    return round_half_away(x * levels(k)).astype(np.int64)


def decode(codes, scale, offset, dtype=np.float64):
    """Grid value ``scale * code + offset`` rounded once to ``dtype``.

    The unit grid (``1/n``, 0) and the symmetric grid (``2/n``, -1) are
    evaluated as exact integer ratios ``c/n`` and ``(2c - n)/n`` so that
    every level is correctly rounded and the symmetric grid is exactly odd.
    """
    c = np.asarray(codes, dtype=np.float64)
    for k in ALLOWED_BITS[:-1]:
        n = levels(k)
        if offset == 0.0 and scale == 1.0 / n:
            return (c / n).astype(dtype)
        if offset == -1.0 and scale == 2.0 / n:
            return ((2.0 * c - n) / n).astype(dtype)
    return (c * scale + offset).astype(dtype)


def symmetric_scale(k):
    return 2.0 / levels(k)


def quantize_unit(x, k):
    """Nearest of the ``2**k`` levels ``i / (2**k - 1)`` to ``x`` in [0, 1]."""
    _check_bits(k)
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise ValueError("quantize_unit expects inputs in [0, 1]; clip first")
    out = decode(unit_codes(arr, k), 1.0 / levels(k), 0.0)
    return float(out) if np.ndim(x) == 0 else out


def weight_codes(w, k):
    """Codes and normaliser ``M = max|tanh(w)|`` for the weight quantizer.

    An all-zero tensor has ``M == 0``; its codes are ``None`` and the caller
    treats the quantized tensor as all zeros.
    """
    _check_bits(k)
    t = np.tanh(np.asarray(w, dtype=np.float64))
    m = float(np.abs(t).max()) if t.size else 0.0
    if m == 0.0:
        return None, 0.0
    x = np.clip(t / (2.0 * m) + 0.5, 0.0, 1.0)
    return unit_codes(x, k), m


def quantize_weights(w, k):
    """Return ``(wq, max_t)``; ``wq`` lies on the k-bit grid in [-1, 1]."""
    if k == IDENTITY_BITS:
        return w, 1.0
    codes, m = weight_codes(w, k)
    if codes is None:
        return np.zeros_like(w), 0.0
    return decode(codes, symmetric_scale(k), -1.0, w.dtype), m


def activation_codes(a, k, symmetric):
    _check_bits(k)
    x = np.asarray(a, dtype=np.float64)
    if symmetric:
        x = (x + 1.0) * 0.5
    return unit_codes(np.clip(x, 0.0, 1.0), k)


def quantize_activations(a, k, range="unit"):
    if k == IDENTITY_BITS:
        return a
    if range not in ("unit", "symmetric"):
        raise ValueError(f"unknown activation range {range!r}")
    symmetric = range == "symmetric"
    codes = activation_codes(a, k, symmetric)
    if symmetric:
        return decode(codes, symmetric_scale(k), -1.0, a.dtype)
    return decode(codes, 1.0 / levels(k), 0.0, a.dtype)


def ste_backward(grad_out, pre_quant_input, kind, max_t, k):
    """Straight-through gradient of a quantizer site.

    The rounding step is treated as identity.  For weights the tanh rescale
    is differentiated with ``max_t`` held constant; activations pass the
    gradient only where the input was inside the representable range.
    """
    if grad_out.shape != pre_quant_input.shape:
        raise ValueError(f"ste_backward shape mismatch {grad_out.shape} vs {pre_quant_input.shape}")
    if k == IDENTITY_BITS:
        return grad_out
    if kind == WEIGHT:
        if max_t == 0.0:
            return np.zeros_like(grad_out)
        sech2 = 1.0 - np.tanh(pre_quant_input) ** 2
        return (grad_out * (sech2 / max_t)).astype(grad_out.dtype)
    if kind == ACT_UNIT:
        inside = (pre_quant_input >= 0) & (pre_quant_input <= 1)
    elif kind == ACT_SYMMETRIC:
        inside = (pre_quant_input >= -1) & (pre_quant_input <= 1)
    else:
        raise ValueError(f"unknown quantizer kind {kind!r}")
    return np.where(inside, grad_out, 0).astype(grad_out.dtype)
