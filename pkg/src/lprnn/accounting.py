"""Exact size, runtime-memory and compute accounting over a ModelSpec.

All totals are integers and all ratios are :class:`fractions.Fraction`, so a
model stored uniformly at ``k`` bits reports exactly ``k/32``.
"""

from dataclasses import dataclass
from fractions import Fraction

from .arch import BILSTM, EMBEDDING, FC, LSTM, OUTPUT

BASELINE_BITS = 32


def layer_params(layer):
    i, o = layer.in_dim, layer.out_dim
    if layer.kind == EMBEDDING:
        return i * o
    if layer.kind in (FC, OUTPUT):
        return i * o + o
    if layer.kind in (LSTM, BILSTM):
        return layer.directions * ((i + o) * 4 * o + 4 * o)
    raise ValueError(f"unknown layer kind {layer.kind!r}")


def layer_macs(layer):
    """Multiply-accumulates per timestep (embedding lookups cost none)."""
    i, o = layer.in_dim, layer.out_dim
    if layer.kind == EMBEDDING:
        return 0
    if layer.kind in (FC, OUTPUT):
        return i * o
    return layer.directions * (i + o) * 4 * o


@dataclass(frozen=True)
class LayerSize:
    index: int
    name: str
    params: int
    weight_bits: int
    bits: int


@dataclass(frozen=True)
class SizeReport:
    layers: tuple
    total_bits: int
    baseline_bits: int

    @property
    def ratio(self):
        return Fraction(self.total_bits, self.baseline_bits)

    @property
    def params(self):
        return sum(layer.params for layer in self.layers)

    @property
    def total_bytes(self):
        return (self.total_bits + 7) // 8


@dataclass(frozen=True)
class LayerMemory:
    index: int
    name: str
    elements: int
    activation_bits: int
    bits: int


@dataclass(frozen=True)
class MemoryReport:
    layers: tuple
    total_bits: int
    baseline_bits: int
    batch: int
    timesteps: int

    @property
    def ratio(self):
        return Fraction(self.total_bits, self.baseline_bits)


@dataclass(frozen=True)
class ComputeReport:
    layers: tuple  # (index, name, macs)
    total: int


def model_size(spec):
    rows = []
    for layer in spec:
        params = layer_params(layer)
        rows.append(LayerSize(layer.index, layer.name, params, layer.weight_bits, params * layer.weight_bits))
    total = sum(r.bits for r in rows)
    baseline = sum(r.params for r in rows) * BASELINE_BITS
    return SizeReport(tuple(rows), total, baseline)


def runtime_memory(spec, batch=1, timesteps=1):
    if batch < 1 or timesteps < 1:
        raise ValueError("batch and timesteps must be >= 1")
    rows = []
    for layer in spec:
        elements = layer.downstream_dim * batch * timesteps
        rows.append(LayerMemory(layer.index, layer.name, elements, layer.activation_bits,
                                elements * layer.activation_bits))
    total = sum(r.bits for r in rows)
    baseline = sum(r.elements for r in rows) * BASELINE_BITS
    return MemoryReport(tuple(rows), total, baseline, batch, timesteps)


def compute_ops(spec):
    rows = tuple((layer.index, layer.name, layer_macs(layer)) for layer in spec)
    return ComputeReport(rows, sum(r[2] for r in rows))


@dataclass(frozen=True)
class Delta:
    """Change of one quantity from a baseline spec to a variant.

    ``relative_pct`` is measured against the baseline's own value;
    ``points_pct`` is measured in percentage points of the baseline evaluated
    at full 32-bit precision, which is how "% of the original size" figures
    are usually quoted.
    """

    baseline: int
    variant: int
    reference: int

    @property
    def relative_pct(self):
        return Fraction(100 * (self.variant - self.baseline), self.baseline)

    @property
    def points_pct(self):
        return Fraction(100 * (self.variant - self.baseline), self.reference)

    @property
    def variant_of_reference_pct(self):
        return Fraction(100 * self.variant, self.reference)


@dataclass(frozen=True)
class CompareReport:
    size: Delta
    memory: Delta
    compute: Delta
    baseline_size: SizeReport
    variant_size: SizeReport
    baseline_memory: MemoryReport
    variant_memory: MemoryReport


def compare(baseline, variant, batch=1, timesteps=1):
    bs, vs = model_size(baseline), model_size(variant)
    bm, vm = runtime_memory(baseline, batch, timesteps), runtime_memory(variant, batch, timesteps)
    bc, vc = compute_ops(baseline), compute_ops(variant)
    return CompareReport(
        size=Delta(bs.total_bits, vs.total_bits, bs.baseline_bits),
        memory=Delta(bm.total_bits, vm.total_bits, bm.baseline_bits),
        compute=Delta(bc.total, vc.total, bc.total),
        baseline_size=bs, variant_size=vs, baseline_memory=bm, variant_memory=vm,
    )


def packed_bytes(rows, cols, bits):
    """Bytes occupied by a packed ``rows x cols`` tensor (rows byte-padded)."""
    return rows * ((cols * bits + 7) // 8)
