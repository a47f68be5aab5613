from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lprnn.accounting import compare, compute_ops, layer_params, model_size, packed_bytes, runtime_memory
from lprnn.arch import BILSTM, EMBEDDING, FC, LSTM, OUTPUT, LayerSpec, ModelSpec
from lprnn.config import data_path, load_arch_config
from lprnn.widening import WidenPlan, apply_widening
from specgen import model_specs


def brute_force_params(layer):
    """Count parameters by materialising every weight/bias array."""
    i, o = layer.in_dim, layer.out_dim
    if layer.kind == EMBEDDING:
        arrays = [np.empty((i, o))]
    elif layer.kind in (FC, OUTPUT):
        arrays = [np.empty((i, o)), np.empty(o)]
    else:
        one = [np.empty((i, 4 * o)), np.empty((o, 4 * o)), np.empty(4 * o)]
        arrays = one * layer.directions
    return sum(a.size for a in arrays)


def test_fc_four_to_five_at_eight_bits():
    spec = ModelSpec((LayerSpec(1, "fc", OUTPUT, 4, 5, weight_bits=8),))
    assert model_size(spec).total_bits == 200


@settings(max_examples=100, deadline=None)
@given(model_specs(), st.sampled_from((1, 2, 4, 8, 16, 32)))
def test_uniform_bits_give_exact_ratio(spec, k):
    assert model_size(spec.with_bits(weight_bits=k)).ratio == Fraction(k, 32)
    assert runtime_memory(spec.with_bits(activation_bits=k), 3, 7).ratio == Fraction(k, 32)


def test_two_equal_layers_memory():
    spec = ModelSpec((LayerSpec(1, "a", FC, 6, 6, activation_bits=4), LayerSpec(2, "b", OUTPUT, 6, 6)))
    assert runtime_memory(spec).ratio == Fraction(9, 16)


def test_single_layer_eight_bit_memory():
    spec = ModelSpec((LayerSpec(1, "o", OUTPUT, 3, 9, activation_bits=8),))
    assert runtime_memory(spec, 2, 5).ratio == Fraction(1, 4)


def test_memory_counts_batch_timesteps_and_directions():
    spec = ModelSpec((LayerSpec(1, "bi", BILSTM, 3, 4), LayerSpec(2, "o", OUTPUT, 8, 2)))
    mem = runtime_memory(spec, 2, 3)
    assert [row.elements for row in mem.layers] == [8 * 6, 2 * 6]
    with pytest.raises(ValueError):
        runtime_memory(spec, 0, 1)


def test_mac_examples():
    assert compute_ops(ModelSpec((LayerSpec(1, "o", OUTPUT, 4, 5),))).total == 20
    assert compute_ops(ModelSpec((LayerSpec(1, "o", OUTPUT, 4, 10),))).total == 40
    lstm = ModelSpec((LayerSpec(1, "l", LSTM, 4, 3), LayerSpec(2, "o", OUTPUT, 3, 1)))
    assert compute_ops(lstm).layers[0][2] == 84
    bi = ModelSpec((LayerSpec(1, "l", BILSTM, 4, 3), LayerSpec(2, "o", OUTPUT, 6, 1)))
    assert compute_ops(bi).layers[0][2] == 168
    emb = ModelSpec((LayerSpec(1, "e", EMBEDDING, 50, 4), LayerSpec(2, "o", OUTPUT, 4, 1)))
    assert compute_ops(emb).layers[0][2] == 0


@settings(max_examples=200, deadline=None)
@given(model_specs())
def test_size_additive_and_matches_enumeration(spec):
    report = model_size(spec)
    assert [r.params for r in report.layers] == [brute_force_params(layer) for layer in spec]
    assert report.total_bits == sum(brute_force_params(layer) * layer.weight_bits for layer in spec)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.integers(2, 4))
def test_widening_scales_fc_counts_linearly(a, b, c, alpha):
    spec = ModelSpec((LayerSpec(1, "fc", FC, a, b), LayerSpec(2, "o", OUTPUT, b, c)))
    wide = apply_widening(spec, WidenPlan((1,), alpha))
    fc, out = wide.layers
    assert fc.in_dim * fc.out_dim == alpha * a * b
    assert out.in_dim * out.out_dim == alpha * b * c
    assert compute_ops(wide).layers[0][2] == alpha * compute_ops(spec).layers[0][2]


def deepspeech():
    return load_arch_config(data_path("deepspeech.reconstruction.ini")).spec.with_bits(weight_bits=4, kinds=(FC, OUTPUT))


def test_deepspeech_hand_calculated_totals():
    base = deepspeech()
    assert model_size(base).total_bits == 3_309_961_332
    w125 = apply_widening(base, WidenPlan((1, 2, 5), 1.25))
    w150 = apply_widening(base, WidenPlan((1, 2, 5), 1.5))
    assert model_size(w125).total_bits == 3_337_252_980
    assert model_size(w150).total_bits == 3_366_641_780
    d125 = compare(base, w125).size.relative_pct
    d150 = compare(base, w150).size.relative_pct
    assert Fraction(4, 10) <= d125 <= 1 and Fraction(9, 10) <= d150 <= 2


def test_deepspeech_recurrent_activation_memory():
    spec = load_arch_config(data_path("deepspeech.reconstruction.ini")).spec
    eight = runtime_memory(spec.with_bits(activation_bits=8, kinds=(BILSTM,)))
    four = runtime_memory(spec.with_bits(activation_bits=4, kinds=(BILSTM,)))
    assert eight.ratio == Fraction(11293, 14365)
    assert four.ratio == Fraction(10781, 14365)


def test_compare_identity_is_zero():
    spec = deepspeech()
    report = compare(spec, spec, 4, 10)
    for delta in (report.size, report.memory, report.compute):
        assert delta.relative_pct == 0 and delta.points_pct == 0


def test_packed_bytes():
    assert packed_bytes(3, 5, 4) == 9
    assert packed_bytes(2, 8, 1) == 2
