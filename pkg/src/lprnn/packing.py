"""Bit-packed storage of quantized tensors and the integer-accumulated matmul."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .quant import IDENTITY_BITS, decode, levels, symmetric_scale

INT64_MAX = np.iinfo(np.int64).max


class EncodingError(ValueError):
    pass


class AccumulatorOverflowError(OverflowError):
    pass


@dataclass
class PackedTensor:
    """Codes packed LSB-first per byte, row-major, each row padded to a byte.

    Values decode as ``scale * code + offset``.  With ``bits == 32`` the
    payload holds raw little-endian float32 values and scale/offset are unused.
    """

    bits: int
    rows: int
    cols: int
    payload: np.ndarray  # uint8, shape (rows, row_bytes)
    scale: float = 1.0
    offset: float = 0.0

    @property
    def nbytes(self):
        return int(self.payload.size)

    def codes(self):
        if self.bits == IDENTITY_BITS:
            raise EncodingError("32-bit tensors are stored raw and carry no codes")
        return kernels.unpack_codes(self.payload, self.bits, self.cols)

    @classmethod
    def from_codes(cls, codes, bits, scale, offset):
        codes = np.asarray(codes)
        if codes.size and (codes.min() < 0 or codes.max() > levels(bits)):
            raise EncodingError(f"code out of range for {bits}-bit packing")
        rows, cols = codes.shape
        return cls(bits, rows, cols, kernels.pack_codes(codes.astype(np.uint32), bits),
                   float(scale), float(offset))


def weight_grid(bits):
    """(scale, offset) of the symmetric [-1, 1] grid used for weights."""
    return symmetric_scale(bits), -1.0


def pack(wq, bits, scale=None, offset=None):
    """Pack a tensor whose entries sit on the ``bits``-level grid.

    The grid defaults to the weight grid ``2 / (2**k - 1) * code - 1``.
    """
    wq = np.asarray(wq)
    if wq.ndim != 2:
        raise EncodingError(f"pack expects a 2-D tensor, got shape {wq.shape}")
    rows, cols = wq.shape
    if bits == IDENTITY_BITS:
        raw = np.ascontiguousarray(wq, dtype="<f4").view(np.uint8).reshape(rows, 4 * cols)
        return PackedTensor(bits, rows, cols, raw.copy())
    if scale is None:
        scale, offset = weight_grid(bits)
    codes = np.rint((wq.astype(np.float64) - offset) / scale)
    if codes.size and (codes.min() < 0 or codes.max() > levels(bits)):
        raise EncodingError(f"value outside the {bits}-bit grid range")
    codes = codes.astype(np.int64)
    if not np.array_equal(decode(codes, scale, offset, wq.dtype), wq):
        bad = np.argwhere(decode(codes, scale, offset, wq.dtype) != wq)[0]
        raise EncodingError(f"entry {tuple(bad)} = {wq[tuple(bad)]!r} is not on the {bits}-bit grid")
    return PackedTensor.from_codes(codes, bits, scale, offset)


def unpack(p, dtype=np.float32):
    if p.bits == IDENTITY_BITS:
        raw = np.ascontiguousarray(p.payload).view("<f4").reshape(p.rows, p.cols)
        return raw.astype(dtype)
    return decode(p.codes(), p.scale, p.offset, dtype)


def accumulator_bound(inner, bits_a, bits_b):
    return inner * levels(bits_a) * levels(bits_b)


def quantized_matmul(a, b):
    """Product of two packed tensors using exact int64 code accumulation.

    With ``A = sa*Ca + oa`` and ``B = sb*Cb + ob`` elementwise,

        A @ B = sa*sb*(Ca@Cb) + sa*ob*rowsum(Ca) + oa*sb*colsum(Cb) + n*oa*ob

    where ``n`` is the inner dimension.  Only the final rescale is done in
    float64.  Returns a float64 array.
    """
    if a.bits == IDENTITY_BITS or b.bits == IDENTITY_BITS:
        raise EncodingError("quantized_matmul needs code tensors, not raw 32-bit ones")
    if a.cols != b.rows:
        raise ValueError(f"quantized_matmul shape mismatch: ({a.rows}, {a.cols}) x ({b.rows}, {b.cols})")
    inner = a.cols
    bound = accumulator_bound(inner, a.bits, b.bits)
    if bound > INT64_MAX:
        raise AccumulatorOverflowError(
            f"inner={inner} at {a.bits}x{b.bits} bits can reach {bound}, above int64 max {INT64_MAX}")
    ca = a.codes()
    cb = b.codes()
    prod = kernels.int_matmul(ca, cb)
    row_sum = ca.sum(axis=1, dtype=np.int64)[:, None]
    col_sum = cb.sum(axis=0, dtype=np.int64)[None, :]
    return (a.scale * b.scale * prod.astype(np.float64)
            + a.scale * b.offset * row_sum.astype(np.float64)
            + a.offset * b.scale * col_sum.astype(np.float64)
            + inner * a.offset * b.offset)
