import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lprnn.packing import (AccumulatorOverflowError, EncodingError, PackedTensor, pack, quantized_matmul,
                           unpack, weight_grid)
from lprnn.quant import quantize_weights


def test_two_bit_codes_pack_to_e4():
    p = PackedTensor.from_codes(np.array([[0, 1, 2, 3]]), 2, *weight_grid(2))
    assert p.payload.tobytes() == b"\xe4"


def test_rows_are_byte_padded():
    p = PackedTensor.from_codes(np.ones((3, 5), dtype=int), 4, *weight_grid(4))
    assert p.payload.shape == (3, 3)


def test_raw_storage_for_32_bits(rng):
    w = rng.standard_normal((3, 4)).astype(np.float32)
    p = pack(w, 32)
    assert p.payload.tobytes() == w.astype("<f4").tobytes()
    assert np.array_equal(unpack(p), w)


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16])
def test_round_trip_quantized_weights(rng, k):
    w = rng.standard_normal((7, 13)).astype(np.float32)
    wq, _ = quantize_weights(w, k)
    assert unpack(pack(wq, k)).tobytes() == wq.tobytes()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(1, 19), st.sampled_from([1, 2, 4, 8, 16]), st.integers(0, 2 ** 32 - 1))
def test_round_trip_property(rows, cols, k, seed):
    codes = np.random.default_rng(seed).integers(0, 2 ** k, (rows, cols))
    p = PackedTensor.from_codes(codes, k, *weight_grid(k))
    assert np.array_equal(p.codes(), codes)
    wq = unpack(p)
    assert unpack(pack(wq, k)).tobytes() == wq.tobytes()


def test_off_grid_entry_rejected():
    with pytest.raises(EncodingError):
        pack(np.array([[0.1, 0.2]], np.float32), 2)


def test_out_of_range_code_rejected():
    with pytest.raises(EncodingError):
        PackedTensor.from_codes(np.array([[4]]), 2, 1.0, 0.0)


def test_quantized_matmul_one_by_one():
    a = PackedTensor.from_codes(np.array([[3]]), 2, *weight_grid(2))
    b = PackedTensor.from_codes(np.array([[3]]), 2, *weight_grid(2))
    assert quantized_matmul(a, b)[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_quantized_matmul_all_zero_codes():
    a = PackedTensor.from_codes(np.zeros((3, 5), int), 4, *weight_grid(4))
    b = PackedTensor.from_codes(np.zeros((5, 2), int), 4, *weight_grid(4))
    oracle = np.full((3, 5), -1.0) @ np.full((5, 2), -1.0)
    assert np.allclose(quantized_matmul(a, b), oracle, rtol=1e-12, atol=0)


def test_quantized_matmul_random_8x8(rng):
    a = PackedTensor.from_codes(rng.integers(0, 16, (8, 8)), 4, *weight_grid(4))
    b = PackedTensor.from_codes(rng.integers(0, 16, (8, 8)), 4, 1 / 15, 0.0)
    oracle = unpack(a, np.float64) @ unpack(b, np.float64)
    got = quantized_matmul(a, b)
    assert np.all(np.abs(got - oracle) <= 1e-6 * np.maximum(np.abs(oracle), 1e-12))


def test_quantized_matmul_overflow_is_rejected():
    # 2**32 * (2**16 - 1)**2 exceeds 2**63 - 1; the bound is checked before any decoding
    inner = 2 ** 32
    a = PackedTensor(16, 1, inner, np.zeros((1, 0), np.uint8), 1.0, 0.0)
    b = PackedTensor(16, inner, 1, np.zeros((0, 1), np.uint8), 1.0, 0.0)
    with pytest.raises(AccumulatorOverflowError, match="int64"):
        quantized_matmul(a, b)


def test_quantized_matmul_shape_mismatch(rng):
    a = PackedTensor.from_codes(rng.integers(0, 4, (2, 3)), 2, *weight_grid(2))
    with pytest.raises(ValueError):
        quantized_matmul(a, a)
