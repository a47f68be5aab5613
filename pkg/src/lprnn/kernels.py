"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every public function here dispatches on :data:`lprnn._accel.USE_NUMBA`.  The
``*_numba`` / ``*_numpy`` variants are exported so the test suite and the
benchmark can compare them directly.

Float matmul accumulation order is fixed: for every output element the inner
dimension is summed strictly left to right, starting from zero, one rounded
multiply and one rounded add per term.  Both backends follow that order, so
results are bit-identical across runs and across backends.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# float matmul
# ---------------------------------------------------------------------------

@njit
def _matmul_kernel(a, b, out):
    m, inner = a.shape
    n = b.shape[1]
    for i in range(m):
        for k in range(inner):
            aik = a[i, k]
            for j in range(n):
                out[i, j] += aik * b[k, j]
    return out


def matmul_numba(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=a.dtype)
    return _matmul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b), out)


def matmul_numpy(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=a.dtype)
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k])
    return out


# ---------------------------------------------------------------------------
# integer matmul (exact, int64 accumulator)
# ---------------------------------------------------------------------------

@njit
def _int_matmul_kernel(a, b, out):
    m, inner = a.shape
    n = b.shape[1]
    for i in range(m):
        for k in range(inner):
            aik = np.int64(a[i, k])
            for j in range(n):
                out[i, j] += aik * np.int64(b[k, j])
    return out


def int_matmul_numba(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    return _int_matmul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b), out)


def int_matmul_numpy(a, b):
    # numpy's integer matmul does not go through BLAS and is exact.
    return a.astype(np.int64) @ b.astype(np.int64)


# ---------------------------------------------------------------------------
# bit packing: LSB-first within each byte, row-major, rows padded to a byte
# ---------------------------------------------------------------------------

def row_bytes(cols, bits):
    return (cols * bits + 7) // 8


@njit
def _pack_kernel(codes, bits, out):
    rows, cols = codes.shape
    stride = out.shape[1]
    for r in range(rows):
        if bits == 16:
            for c in range(cols):
                v = codes[r, c]
                out[r, 2 * c] = v & 0xFF
                out[r, 2 * c + 1] = (v >> 8) & 0xFF
        else:
            for c in range(cols):
                pos = c * bits
                byte = pos >> 3
                shift = pos & 7
                out[r, byte] |= np.uint8((codes[r, c] << shift) & 0xFF)
    return out


@njit
def _unpack_kernel(buf, bits, cols, out):
    rows = buf.shape[0]
    mask = (1 << bits) - 1
    for r in range(rows):
        if bits == 16:
            for c in range(cols):
                out[r, c] = np.uint32(buf[r, 2 * c]) | (np.uint32(buf[r, 2 * c + 1]) << 8)
        else:
            for c in range(cols):
                pos = c * bits
                out[r, c] = (np.uint32(buf[r, pos >> 3]) >> (pos & 7)) & mask
    return out


def pack_codes_numba(codes, bits):
    codes = np.ascontiguousarray(codes, dtype=np.uint32)
    out = np.zeros((codes.shape[0], row_bytes(codes.shape[1], bits)), dtype=np.uint8)
    return _pack_kernel(codes, bits, out)


def unpack_codes_numba(buf, bits, cols):
    buf = np.ascontiguousarray(buf, dtype=np.uint8)
    out = np.zeros((buf.shape[0], cols), dtype=np.uint32)
    return _unpack_kernel(buf, bits, cols, out)


def pack_codes_numpy(codes, bits):
    codes = np.asarray(codes, dtype=np.uint32)
    rows, cols = codes.shape
    if bits == 16:
        return np.ascontiguousarray(codes.astype("<u2")).view(np.uint8).reshape(rows, 2 * cols)
    if bits == 8:
        return codes.astype(np.uint8)
    per_byte = 8 // bits
    nbytes = row_bytes(cols, bits)
    padded = np.zeros((rows, nbytes * per_byte), dtype=np.uint32)
    padded[:, :cols] = codes
    shifts = (np.arange(per_byte, dtype=np.uint32) * bits)
    grouped = padded.reshape(rows, nbytes, per_byte) << shifts
    return np.bitwise_or.reduce(grouped, axis=2).astype(np.uint8)


def unpack_codes_numpy(buf, bits, cols):
    buf = np.asarray(buf, dtype=np.uint8)
    rows = buf.shape[0]
    if bits == 16:
        return np.ascontiguousarray(buf).view("<u2").reshape(rows, cols).astype(np.uint32)
    if bits == 8:
        return buf[:, :cols].astype(np.uint32)
    per_byte = 8 // bits
    shifts = (np.arange(per_byte, dtype=np.uint32) * bits)
    expanded = (buf.astype(np.uint32)[:, :, None] >> shifts) & ((1 << bits) - 1)
    return expanded.reshape(rows, -1)[:, :cols]


if USE_NUMBA:
    matmul = matmul_numba
    int_matmul = int_matmul_numba
    pack_codes = pack_codes_numba
    unpack_codes = unpack_codes_numba
else:
    matmul = matmul_numpy
    int_matmul = int_matmul_numpy
    pack_codes = pack_codes_numpy
    unpack_codes = unpack_codes_numpy
