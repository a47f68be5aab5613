"""Neuron-increase transform: pick small layers and scale their width."""

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .accounting import layer_params, model_size
from .arch import EMBEDDING, FC, OUTPUT, ChainError, ModelSpec


@dataclass(frozen=True)
class WidenPlan:
    selected: tuple
    factor: float
    warning: str | None = None

    @property
    def is_empty(self):
        return not self.selected


def round_half_away(x):
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def check_plan(spec, plan):
    last = spec.layers[-1]
    for index in plan.selected:
        layer = spec.by_index(index)
        if layer.kind == OUTPUT or layer is last:
            raise ValueError(f"layer {index} ({layer.name!r}) is the output layer and cannot be widened")
    if plan.selected and not plan.factor > 1:
        raise ValueError(f"widening factor must be > 1, got {plan.factor}")


def apply_widening(spec, plan):
    """Scale every selected layer's ``out_dim`` and re-plumb the next ``in_dim``."""
    check_plan(spec, plan)
    if plan.is_empty:
        return spec
    chosen = set(plan.selected)
    layers = []
    prev = None
    for layer in spec:
        changes = {}
        if layer.index in chosen:
            width = round_half_away(layer.out_dim * plan.factor)
            if width < 1:
                raise ValueError(f"layer {layer.index} would shrink to width {width}")
            changes["out_dim"] = width
        if prev is not None and prev.index in chosen:
            changes["in_dim"] = layers[-1].downstream_dim
        layers.append(layer.with_(**changes) if changes else layer)
        prev = layer
    try:
        return ModelSpec(tuple(layers), spec.name)
    except ChainError as exc:  # pragma: no cover - indicates a bug above
        raise ChainError(f"widening broke the layer chain: {exc}") from exc


def size_increase(spec, plan):
    """Exact fractional growth of total model bits caused by ``plan``."""
    base = model_size(spec).total_bits
    return Fraction(model_size(apply_widening(spec, plan)).total_bits - base, base)


def _hidden_layers(spec):
    return [layer for layer in spec if layer.kind not in (EMBEDDING, OUTPUT)]


def select_layers(spec, budget_fraction, factor, override=None):
    """Choose layers to widen by ``factor`` within a size-growth budget.

    Fully-connected layers are ranked by parameter count (then index) and the
    longest prefix of that ranking whose projected growth stays within
    ``budget_fraction`` is selected.  A model with a single hidden layer
    skips the ranking and widens that layer.  ``override`` forces an explicit
    list of layer indices.
    """
    if not factor > 1:
        raise ValueError(f"widening factor must be > 1, got {factor}")
    if override is not None:
        plan = WidenPlan(tuple(sorted(set(override))), factor)
        check_plan(spec, plan)
        return plan
    if budget_fraction <= 0:
        return WidenPlan((), factor)
    hidden = _hidden_layers(spec)
    if len(hidden) == 1:
        return WidenPlan((hidden[0].index,), factor)
    candidates = sorted((layer for layer in hidden if layer.kind == FC),
                        key=lambda layer: (layer_params(layer), layer.index))
    if not candidates:
        msg = "no fully-connected layers eligible for widening"
        warnings.warn(msg)
        return WidenPlan((), factor, warning=msg)
    budget = Fraction(str(budget_fraction))
    chosen = []
    for layer in candidates:
        trial = WidenPlan(tuple(sorted(chosen + [layer.index])), factor)
        if size_increase(spec, trial) > budget:
            break
        chosen.append(layer.index)
    return WidenPlan(tuple(sorted(chosen)), factor)
