"""Low-precision LSTM language models: quantize, widen, account."""

from ._accel import backend_name
from .accounting import compare, compute_ops, model_size, runtime_memory
from .arch import LayerSpec, ModelSpec, lm_spec
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Vocab, batchify, build_vocab
from .lstm import EvalReport, LmModel, LstmParams, Schedule, backward, evaluate_ppw, forward_sequence, init_model, lstm_step, train
from .packing import PackedTensor, pack, quantized_matmul, unpack
from .quant import QuantSpec, quantize_activations, quantize_unit, quantize_weights, ste_backward
from .tensor import SeededRng, elementwise, matmul, softmax_xent
from .widening import WidenPlan, apply_widening, select_layers

__version__ = "0.1.0"
