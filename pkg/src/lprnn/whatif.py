"""Accounting what-if reports: re-assign bit-widths, widen, compare."""

from dataclasses import dataclass

from .accounting import compare, layer_macs
from .arch import BILSTM, EMBEDDING, FC, KINDS, LSTM, OUTPUT
from .widening import apply_widening, select_layers

# "fc" covers every fully-connected layer including the output classifier;
# "fully-connected" matches only hidden FC layers.
KIND_ALIASES = {
    "fc": (FC, OUTPUT),
    "fully-connected": (FC,),
    "lstm": (LSTM,),
    "bilstm": (BILSTM,),
    "bidirectional-lstm": (BILSTM,),
    "recurrent": (LSTM, BILSTM),
    "embedding": (EMBEDDING,),
    "output": (OUTPUT,),
    "all": KINDS,
}


def parse_assignment(items):
    """``["fc=4", "recurrent=32"]`` -> ``[((kinds...), 4), ...]``."""
    out = []
    for item in items or ():
        try:
            key, value = item.split("=", 1)
            kinds = KIND_ALIASES[key.strip().lower()]
            bits = int(value)
        except (ValueError, KeyError):
            raise ValueError(f"bad bit assignment {item!r}; expected KIND=BITS with KIND in {sorted(KIND_ALIASES)}")
        out.append((kinds, bits))
    return out


def assign_bits(spec, weight_bits=(), activation_bits=()):
    for kinds, bits in weight_bits:
        spec = spec.with_bits(weight_bits=bits, kinds=kinds)
    for kinds, bits in activation_bits:
        spec = spec.with_bits(activation_bits=bits, kinds=kinds)
    return spec


@dataclass
class WhatIf:
    baseline: object  # bit-assigned spec
    variant: object  # widened spec
    plan: object
    report: object  # CompareReport baseline -> variant
    reference: dict


def run_whatif(arch, weight_bits=(), activation_bits=(), factor=None, budget=None, layers=None,
               batch=None, timesteps=None):
    spec = assign_bits(arch.spec, weight_bits, activation_bits)
    plan = None
    variant = spec
    if factor is not None:
        if budget is None and layers is None:
            raise ValueError("widening needs either a size budget or an explicit layer list")
        plan = select_layers(spec, budget or 0.0, factor, override=layers)
        variant = apply_widening(spec, plan)
    report = compare(spec, variant, batch or arch.batch, timesteps or arch.timesteps)
    return WhatIf(spec, variant, plan, report, dict(arch.reference))


def _pct(frac, digits=3):
    return f"{float(frac):+.{digits}f}%"


def render(w, digits=3):
    rep = w.report
    lines = []
    name = w.baseline.name or "model"
    lines.append(f"what-if report: {name}")
    if w.plan is not None:
        sel = ", ".join(str(i) for i in w.plan.selected) or "(none)"
        lines.append(f"widen factor {w.plan.factor:g}; selected layers: {sel}")
        if w.plan.warning:
            lines.append(f"warning: {w.plan.warning}")
    header = (f"{'idx':>3} {'name':<10} {'kind':<18} {'in':>6} {'out':>6} {'w_bits':>6} "
              f"{'params':>12} {'size_bits':>14} {'a_bits':>6} {'act_bits':>12} {'MACs':>12}")
    for label, spec, size, mem in (
        ("baseline", w.baseline, rep.baseline_size, rep.baseline_memory),
        ("variant", w.variant, rep.variant_size, rep.variant_memory),
    ):
        lines.append("")
        lines.append(f"[{label}]")
        lines.append(header)
        for layer, ls, lm in zip(spec, size.layers, mem.layers):
            macs = layer_macs(layer)
            lines.append(f"{layer.index:>3} {layer.name:<10} {layer.kind:<18} {layer.in_dim:>6} {layer.out_dim:>6} "
                         f"{layer.weight_bits:>6} {ls.params:>12} {ls.bits:>14} {layer.activation_bits:>6} "
                         f"{lm.bits:>12} {macs:>12}")
        lines.append(f"total size {size.total_bits} bits ({float(size.ratio) * 100:.{digits}f}% of 32-bit); "
                     f"memory {mem.total_bits} bits ({float(mem.ratio) * 100:.{digits}f}% of 32-bit, "
                     f"batch={mem.batch}, timesteps={mem.timesteps})")
    lines.append("")
    lines.append("deltas (variant vs baseline):")
    lines.append(f"  size     relative {_pct(rep.size.relative_pct, digits)}   points {_pct(rep.size.points_pct, digits)}")
    lines.append(f"  memory   relative {_pct(rep.memory.relative_pct, digits)}   points {_pct(rep.memory.points_pct, digits)}")
    lines.append(f"  compute  relative {_pct(rep.compute.relative_pct, digits)}")
    if w.reference:
        lines.append("")
        lines.append("published reference figures (from the config's [reference] section; "
                     "architecture dims are a reconstruction, so expect bands, not equality):")
        for key, value in sorted(w.reference.items()):
            lines.append(f"  {key} = {value:g}")
    return "\n".join(lines) + "\n"
