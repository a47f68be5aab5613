"""Compare the numba and pure-numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Both variants are called directly, so one process times both regardless of
``LPRNN_DISABLE_NUMBA``.  Outputs are checked for bit-equality first.
"""

import argparse
import timeit

import numpy as np

from lprnn._accel import backend_name
from lprnn.kernels import (int_matmul_numba, int_matmul_numpy, matmul_numba, matmul_numpy, pack_codes_numba,
                           pack_codes_numpy, unpack_codes_numba, unpack_codes_numpy)


def cases(rng):
    a = rng.standard_normal((32, 96)).astype(np.float32)  # one LSTM step: batch x (E + H)
    b = rng.standard_normal((96, 256)).astype(np.float32)  # (E + H) x 4H
    ca = rng.integers(0, 16, (64, 128)).astype(np.int64)
    cb = rng.integers(0, 16, (128, 64)).astype(np.int64)
    codes = rng.integers(0, 16, (256, 1024)).astype(np.int64)
    packed = pack_codes_numpy(codes, 4)
    return [
        ("matmul f32 32x96 @ 96x256", matmul_numba, matmul_numpy, (a, b)),
        ("int matmul 64x128 @ 128x64", int_matmul_numba, int_matmul_numpy, (ca, cb)),
        ("pack 4-bit 256x1024", pack_codes_numba, pack_codes_numpy, (codes, 4)),
        ("unpack 4-bit 256x1024", unpack_codes_numba, unpack_codes_numpy, (packed, 4, 1024)),
    ]


def best_ms(func, args, repeat, number):
    return min(timeit.repeat(lambda: func(*args), repeat=repeat, number=number)) / number * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=20)
    args = parser.parse_args()
    print(f"active backend: {backend_name()}")
    print(f"{'kernel':<30} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, fast, slow, call_args in cases(np.random.default_rng(0)):
        assert np.array_equal(fast(*call_args), slow(*call_args)), name
        t_fast = best_ms(fast, call_args, args.repeat, args.number)
        t_slow = best_ms(slow, call_args, args.repeat, args.number)
        print(f"{name:<30} {t_fast:>10.4f} {t_slow:>10.4f} {t_slow / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
