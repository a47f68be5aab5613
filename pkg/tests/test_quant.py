import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lprnn.quant import (ACT_SYMMETRIC, ACT_UNIT, WEIGHT, QuantSpec, quantize_activations, quantize_unit,
                         quantize_weights, ste_backward)

BITS = (1, 2, 4, 8)
unit_floats = st.floats(0.0, 1.0, allow_nan=False)


@pytest.mark.parametrize("k", BITS + (16,))
def test_endpoints_are_levels(k):
    assert quantize_unit(0.0, k) == 0.0
    assert quantize_unit(1.0, k) == 1.0


def test_two_bit_nearest_level():
    # levels {0, 1/3, 2/3, 1}; 0.3 is nearest to 1/3
    assert quantize_unit(0.3, 2) == pytest.approx(1 / 3, abs=1e-15)


def test_one_bit_tie_rounds_away_from_zero():
    assert quantize_unit(0.5, 1) == 1.0


def test_quantize_unit_rejects_bad_input():
    with pytest.raises(ValueError):
        quantize_unit(1.2, 2)
    with pytest.raises(ValueError):
        quantize_unit(0.2, 3)
    with pytest.raises(ValueError):
        quantize_unit(0.2, 32)


@settings(max_examples=300, deadline=None)
@given(unit_floats, st.sampled_from(BITS))
def test_level_set_idempotence_bound(x, k):
    n = 2 ** k - 1
    y = quantize_unit(x, k)
    assert abs(y * n - round(y * n)) < 1e-9
    assert quantize_unit(y, k) == y
    assert abs(y - x) <= 1 / (2 * n) + 1e-15


@settings(max_examples=300, deadline=None)
@given(unit_floats, unit_floats, st.sampled_from(BITS))
def test_monotone(x, y, k):
    lo, hi = min(x, y), max(x, y)
    assert quantize_unit(lo, k) <= quantize_unit(hi, k)


def test_quant_spec_validation():
    QuantSpec(4, 2)
    with pytest.raises(ValueError, match="weight_bits"):
        QuantSpec(5, 4)
    with pytest.raises(ValueError, match="activation_bits"):
        QuantSpec(4, 3)
    assert QuantSpec().is_identity


def test_weights_all_zero_stay_zero():
    w = np.zeros((3, 4), np.float32)
    for k in BITS:
        wq, m = quantize_weights(w, k)
        assert not wq.any() and m == 0.0


def test_weights_one_bit_hand_example():
    # tanh(+-0.5) = +-0.4621, M = 0.4621 -> unit args {1, 0} -> levels {+1, -1}
    wq, m = quantize_weights(np.array([[0.5, -0.5]], np.float32), 1)
    assert wq.tolist() == [[1.0, -1.0]]
    assert m == pytest.approx(np.tanh(0.5))


def test_weights_identity_sentinel(rng):
    w = rng.standard_normal((4, 5)).astype(np.float32)
    wq, _ = quantize_weights(w, 32)
    assert wq.tobytes() == w.tobytes()


@pytest.mark.parametrize("k", BITS)
def test_weights_on_grid_in_range(rng, k):
    w = rng.standard_normal((16, 16)).astype(np.float32)
    wq, _ = quantize_weights(w, k)
    n = 2 ** k - 1
    codes = (wq.astype(np.float64) + 1) * n / 2
    assert np.all(np.abs(codes - np.rint(codes)) < 1e-5)
    assert wq.min() >= -1 and wq.max() <= 1
    assert wq.max() == 1.0 or wq.min() == -1.0


@pytest.mark.parametrize("k", BITS)
def test_weight_antisymmetry_off_ties(rng, k):
    w = rng.standard_normal((20, 20))
    wq, m = quantize_weights(w, k)
    wq_neg, _ = quantize_weights(-w, k)
    n = 2 ** k - 1
    scaled = n * (np.tanh(w) / (2 * m) + 0.5)
    off_tie = np.abs(scaled - np.floor(scaled) - 0.5) > 1e-9
    assert np.array_equal(wq_neg[off_tie], -wq[off_tie])


def test_activations_unit_one_bit():
    a = np.array([[0.0, 0.5, 1.0]], np.float32)
    assert quantize_activations(a, 1, "unit").tolist() == [[0.0, 1.0, 1.0]]


def test_activations_symmetric_clip():
    a = np.array([[-2.0, 2.0]], np.float32)
    assert quantize_activations(a, 4, "symmetric").tolist() == [[-1.0, 1.0]]


def test_activations_identity(rng):
    a = rng.standard_normal((3, 3)).astype(np.float32)
    assert quantize_activations(a, 32, "unit") is a


@pytest.mark.parametrize("k", BITS)
def test_symmetric_activation_levels(rng, k):
    a = rng.uniform(-1.5, 1.5, (50, 50)).astype(np.float32)
    out = quantize_activations(a, k, "symmetric")
    assert len(np.unique(out)) <= 2 ** k
    assert out.min() >= -1 and out.max() <= 1


def test_ste_activation_pass_through_and_mask():
    g = np.array([[0.3, -0.7, 2.0]], np.float32)
    inside = np.array([[0.1, 0.5, 0.99]], np.float32)
    assert np.array_equal(ste_backward(g, inside, ACT_UNIT, 1.0, 4), g)
    clipped = np.array([[1.7, 0.5, -0.1]], np.float32)
    assert ste_backward(g, clipped, ACT_UNIT, 1.0, 4).tolist() == [[0.0, pytest.approx(-0.7), 0.0]]
    sym = np.array([[-1.5, 0.0, 1.0]], np.float32)
    assert ste_backward(g, sym, ACT_SYMMETRIC, 1.0, 2)[0, 0] == 0.0


def test_ste_weight_multiplier_at_zero():
    g = np.ones((1, 1))
    assert ste_backward(g, np.zeros((1, 1)), WEIGHT, 0.5, 4)[0, 0] == pytest.approx(2.0)


def test_ste_identity_sentinel(rng):
    g = rng.standard_normal((2, 3))
    assert ste_backward(g, rng.standard_normal((2, 3)) * 5, WEIGHT, 0.3, 32) is g


def test_ste_shape_mismatch():
    with pytest.raises(ValueError):
        ste_backward(np.zeros((2, 2)), np.zeros((2, 3)), ACT_UNIT, 1.0, 4)
