"""Layer-level architecture descriptions shared by widening and accounting."""

from dataclasses import dataclass, replace

from .quant import ALLOWED_BITS

FC = "fully-connected"
LSTM = "lstm"
BILSTM = "bidirectional-lstm"
EMBEDDING = "embedding"
OUTPUT = "output"
KINDS = (FC, LSTM, BILSTM, EMBEDDING, OUTPUT)
RECURRENT = (LSTM, BILSTM)


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    index: int
    name: str
    kind: str
    in_dim: int
    out_dim: int
    weight_bits: int = 32
    activation_bits: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer {self.name!r}: dims must be >= 1, got {self.in_dim}->{self.out_dim}")
        for field in ("weight_bits", "activation_bits"):
            if getattr(self, field) not in ALLOWED_BITS:
                raise ValueError(f"layer {self.name!r}: {field}={getattr(self, field)} not in {ALLOWED_BITS}")

    @property
    def directions(self):
        return 2 if self.kind == BILSTM else 1

    @property
    def downstream_dim(self):
        """Width seen by the next layer."""
        return self.out_dim * self.directions

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    def validate(self):
        if not self.layers:
            raise ChainError("model spec has no layers")
        indices = [layer.index for layer in self.layers]
        if len(set(indices)) != len(indices):
            raise ChainError(f"duplicate layer indices {indices}")
        for pos, layer in enumerate(self.layers):
            if layer.kind == OUTPUT and pos != len(self.layers) - 1:
                raise ChainError(f"output layer {layer.name!r} must be last")
            if layer.kind == EMBEDDING and pos != 0:
                raise ChainError(f"embedding layer {layer.name!r} must be first")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.downstream_dim:
                raise ChainError(
                    f"chain break: {prev.name!r} emits {prev.downstream_dim} but "
                    f"{nxt.name!r} expects {nxt.in_dim}")

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def by_index(self, index):
        for layer in self.layers:
            if layer.index == index:
                return layer
        raise KeyError(f"no layer with index {index}")

    def with_bits(self, weight_bits=None, activation_bits=None, kinds=None):
        """Copy with bit-widths overridden on layers whose kind is in ``kinds``."""
        layers = []
        for layer in self.layers:
            if kinds is None or layer.kind in kinds:
                changes = {}
                if weight_bits is not None:
                    changes["weight_bits"] = weight_bits
                if activation_bits is not None:
                    changes["activation_bits"] = activation_bits
                layer = layer.with_(**changes)
            layers.append(layer)
        return ModelSpec(tuple(layers), self.name)

    def at_full_precision(self):
        return self.with_bits(32, 32)


def lm_spec(vocab_size, embed_dim, hidden_size, weight_bits=32, activation_bits=32,
            quantize_embedding_projection=True):
    """Architecture of the single-layer LSTM language model.

    The logits are never quantized, so the output layer always reports
    32-bit activations.
    """
    edge_bits = weight_bits if quantize_embedding_projection else 32
    return ModelSpec((
        LayerSpec(1, "embedding", EMBEDDING, vocab_size, embed_dim, edge_bits, activation_bits),
        LayerSpec(2, "lstm", LSTM, embed_dim, hidden_size, weight_bits, activation_bits),
        LayerSpec(3, "output", OUTPUT, hidden_size, vocab_size, edge_bits, 32),
    ), name="lstm-lm")
