"""Quantization-aware single-layer LSTM language model.

Forward and backward are written out by hand.  Effective weights are
re-quantized from full-precision master weights on every forward pass; the
straight-through estimator carries gradients back to the master copies.

Quantizer sites (everything else, including gates and the cell state, stays
in full precision):

* embedding, LSTM weight/bias, projection weight/bias: weight quantizer at
  ``weight_bits`` (embedding and projection can be excluded per model);
* looked-up embedding vectors and the hidden state ``h``: symmetric
  activation quantizer at ``activation_bits``.

A model built with ``quant=None`` never touches the quantizer code at all.
That is the reference path the 32/32 configuration must reproduce exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import quant as q
from .corpus import batchify
from .tensor import DTYPE, SeededRng, ShapeError, init_uniform, log_softmax, matmul, sigmoid, softmax_xent

PARAM_NAMES = ("embedding", "lstm_w", "lstm_b", "projection", "projection_bias")


class DivergenceError(ArithmeticError):
    pass


@dataclass
class LstmParams:
    W: np.ndarray  # (E + H) x 4H, gate blocks [i | f | g | o]
    b: np.ndarray  # 1 x 4H
    input_size: int
    hidden_size: int

    def __post_init__(self):
        e, h = self.input_size, self.hidden_size
        if self.W.shape != (e + h, 4 * h) or self.b.shape != (1, 4 * h):
            raise ShapeError(f"LSTM params {self.W.shape}/{self.b.shape} do not match E={e}, H={h}")


@dataclass
class LmModel:
    embedding: np.ndarray  # V x E
    lstm: LstmParams
    projection: np.ndarray  # H x V
    projection_bias: np.ndarray  # 1 x V
    quant: q.QuantSpec | None = field(default_factory=q.QuantSpec)
    quantize_embedding_projection: bool = True
    # Set on models restored from a checkpoint: the stored tensors already are
    # the effective (quantized) weights and must not be re-quantized.
    prequantized: bool = False

    def __post_init__(self):
        v, e = self.embedding.shape
        if e != self.lstm.input_size:
            raise ShapeError(f"embedding width {e} != LSTM input size {self.lstm.input_size}")
        if self.projection.shape != (self.lstm.hidden_size, v) or self.projection_bias.shape != (1, v):
            raise ShapeError("projection shape does not match hidden size / vocabulary")

    @property
    def vocab_size(self):
        return self.embedding.shape[0]

    @property
    def embed_dim(self):
        return self.lstm.input_size

    @property
    def hidden_size(self):
        return self.lstm.hidden_size

    @property
    def weight_bits(self):
        return q.IDENTITY_BITS if self.quant is None else self.quant.weight_bits

    @property
    def activation_bits(self):
        return q.IDENTITY_BITS if self.quant is None else self.quant.activation_bits

    def tensor_bits(self, name):
        """Weight bit-width applied to parameter ``name``."""
        if name in ("embedding", "projection", "projection_bias") and not self.quantize_embedding_projection:
            return q.IDENTITY_BITS
        return self.weight_bits

    def params(self):
        return {
            "embedding": self.embedding,
            "lstm_w": self.lstm.W,
            "lstm_b": self.lstm.b,
            "projection": self.projection,
            "projection_bias": self.projection_bias,
        }

    def set_param(self, name, value):
        if name == "lstm_w":
            self.lstm.W = value
        elif name == "lstm_b":
            self.lstm.b = value
        else:
            setattr(self, name, value)

    def copy(self):
        return LmModel(
            self.embedding.copy(),
            LstmParams(self.lstm.W.copy(), self.lstm.b.copy(), self.lstm.input_size, self.lstm.hidden_size),
            self.projection.copy(),
            self.projection_bias.copy(),
            self.quant,
            self.quantize_embedding_projection,
            self.prequantized,
        )


def init_model(vocab_size, embed_dim, hidden_size, quant=None, seed=0, dtype=DTYPE,
               quantize_embedding_projection=True, forget_bias=1.0):
    """Uniform(+-1/sqrt(fan_in)) init; the embedding uses ``fan_in = embed_dim``."""
    rng = SeededRng(seed)
    e, h, v = embed_dim, hidden_size, vocab_size
    emb = init_uniform(rng, e, (v, e), dtype)
    w = init_uniform(rng, e + h, (e + h, 4 * h), dtype)
    b = np.zeros((1, 4 * h), dtype=dtype)
    b[:, h:2 * h] = forget_bias
    proj = init_uniform(rng, h, (h, v), dtype)
    proj_b = np.zeros((1, v), dtype=dtype)
    return LmModel(emb, LstmParams(w, b, e, h), proj, proj_b, quant, quantize_embedding_projection)


# ---------------------------------------------------------------------------
# effective (quantized) weights
# ---------------------------------------------------------------------------

def effective_weights(model):
    """Map parameter name -> (effective tensor, max_t used by the quantizer)."""
    out = {}
    for name, w in model.params().items():
        if model.quant is None or model.prequantized:
            out[name] = (w, 1.0)
        else:
            out[name] = q.quantize_weights(w, model.tensor_bits(name))
    return out


def _quantize_act(model, a):
    if model.quant is None:
        return a
    return q.quantize_activations(a, model.quant.activation_bits, "symmetric")


def _act_backward(model, grad, pre):
    if model.quant is None:
        return grad
    return q.ste_backward(grad, pre, q.ACT_SYMMETRIC, 1.0, model.quant.activation_bits)


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    xh: np.ndarray
    gates: np.ndarray  # activated [i | f | g | o]
    c_prev: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h_raw: np.ndarray


@dataclass
class ForwardTape:
    tokens: np.ndarray  # batch x T
    x_pre: np.ndarray  # batch x T x E, looked-up embedding before the activation quantizer
    steps: list
    hs: np.ndarray  # T x batch x H, quantized hidden states
    logits: np.ndarray  # T x batch x V
    weights: dict
    h0: np.ndarray
    c0: np.ndarray

    def __len__(self):
        return len(self.steps)


def lstm_step(x_t, h_prev, c_prev, params, quant, wq=None, bq=None, act=None):
    """One LSTM step; returns ``(h, c, record)``.

    ``wq``/``bq`` may carry pre-quantized weights so a sequence quantizes them
    once; by default they are computed from ``params`` and ``quant``.
    """
    hsz = params.hidden_size
    if x_t.shape[1] != params.input_size or h_prev.shape[1] != hsz or c_prev.shape != h_prev.shape:
        raise ShapeError(f"lstm_step shapes x={x_t.shape} h={h_prev.shape} c={c_prev.shape}")
    if wq is None:
        if quant is None:
            wq, bq = params.W, params.b
        else:
            wq, _ = q.quantize_weights(params.W, quant.weight_bits)
            bq, _ = q.quantize_weights(params.b, quant.weight_bits)
    xh = np.concatenate([x_t, h_prev], axis=1)
    z = matmul(xh, wq) + bq
    gates = np.empty_like(z)
    gates[:, :2 * hsz] = sigmoid(z[:, :2 * hsz])
    gates[:, 2 * hsz:3 * hsz] = np.tanh(z[:, 2 * hsz:3 * hsz])
    gates[:, 3 * hsz:] = sigmoid(z[:, 3 * hsz:])
    i, f, g, o = (gates[:, k * hsz:(k + 1) * hsz] for k in range(4))
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h_raw = o * tanh_c
    if act is not None:
        h = act(h_raw)
    elif quant is not None:
        h = q.quantize_activations(h_raw, quant.activation_bits, "symmetric")
    else:
        h = h_raw
    return h, c, StepRecord(xh, gates, c_prev, c, tanh_c, h_raw)


def forward_sequence(tokens, model, h0=None, c0=None, record=True):
    """Run the model over ``tokens`` (batch x T).

    Returns ``(logits, tape, (h_T, c_T))`` with logits shaped T x batch x V.
    ``tape`` is ``None`` when ``record`` is false.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2:
        raise ShapeError(f"tokens must be batch x T, got {tokens.shape}")
    v = model.vocab_size
    if tokens.size and (tokens.min() < 0 or tokens.max() >= v):
        raise IndexError(f"token id out of range for vocabulary of {v}")
    batch, steps = tokens.shape
    hsz = model.hidden_size
    dtype = model.embedding.dtype
    h = np.zeros((batch, hsz), dtype) if h0 is None else h0
    c = np.zeros((batch, hsz), dtype) if c0 is None else c0
    weights = effective_weights(model)
    emb_q = weights["embedding"][0]
    wq, bq = weights["lstm_w"][0], weights["lstm_b"][0]
    x_pre = emb_q[tokens]
    x_all = _quantize_act(model, x_pre)
    act = lambda a: _quantize_act(model, a)
    h_start, c_start = h, c
    hs = np.empty((steps, batch, hsz), dtype)
    records = []
    for t in range(steps):
        h, c, rec = lstm_step(x_all[:, t, :], h, c, model.lstm, None, wq, bq, act)
        hs[t] = h
        if record:
            records.append(rec)
    proj, proj_b = weights["projection"][0], weights["projection_bias"][0]
    logits = (matmul(hs.reshape(steps * batch, hsz), proj) + proj_b).reshape(steps, batch, v)
    tape = ForwardTape(tokens, x_pre, records, hs, logits, weights, h_start, c_start) if record else None
    return logits, tape, (h, c)


def sequence_loss(logits, targets):
    """Mean NLL and its logits gradient; ``targets`` is batch x T."""
    steps, batch, v = logits.shape
    flat_targets = np.asarray(targets, dtype=np.int64).T.reshape(-1)
    return softmax_xent(logits.reshape(steps * batch, v), flat_targets)


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def backward(tape, model, targets=None, dlogits=None):
    """Reverse-mode gradients of mean NLL w.r.t. every master parameter.

    Pass either ``targets`` (batch x T) or an explicit upstream ``dlogits``
    (T x batch x V).  Returns ``(loss, grads)``; ``loss`` is ``None`` when
    ``dlogits`` was given.
    """
    steps, batch, hsz = tape.hs.shape
    if steps != len(tape.steps) or hsz != model.hidden_size or tape.tokens.shape != (batch, steps):
        raise ValueError("tape does not belong to this model / sequence")
    v, e = model.vocab_size, model.embed_dim
    w = tape.weights
    loss = None
    if dlogits is None:
        loss, dflat = sequence_loss(tape.logits, targets)
    else:
        dflat = np.asarray(dlogits).reshape(steps * batch, v)
    hs_flat = tape.hs.reshape(steps * batch, hsz)

    d_eff = {}
    d_eff["projection"] = matmul(np.ascontiguousarray(hs_flat.T), dflat)
    d_eff["projection_bias"] = dflat.sum(axis=0, keepdims=True)
    dhs = matmul(dflat, np.ascontiguousarray(w["projection"][0].T)).reshape(steps, batch, hsz)

    wq = w["lstm_w"][0]
    wq_t = np.ascontiguousarray(wq.T)
    dz_all = np.empty((steps, batch, 4 * hsz), dtype=dflat.dtype)
    dx = np.empty((batch, steps, e), dtype=dflat.dtype)
    dh_next = np.zeros((batch, hsz), dflat.dtype)
    dc_next = np.zeros((batch, hsz), dflat.dtype)
    for t in reversed(range(steps)):
        rec = tape.steps[t]
        gates = rec.gates
        i, f, g, o = (gates[:, k * hsz:(k + 1) * hsz] for k in range(4))
        dh = _act_backward(model, dhs[t] + dh_next, rec.h_raw)
        do = dh * rec.tanh_c
        dc = dc_next + dh * o * (1 - rec.tanh_c ** 2)
        dz = dz_all[t]
        dz[:, :hsz] = dc * g * i * (1 - i)
        dz[:, hsz:2 * hsz] = dc * rec.c_prev * f * (1 - f)
        dz[:, 2 * hsz:3 * hsz] = dc * i * (1 - g ** 2)
        dz[:, 3 * hsz:] = do * o * (1 - o)
        dc_next = dc * f
        dxh = matmul(dz, wq_t)
        dx[:, t, :] = dxh[:, :e]
        dh_next = dxh[:, e:]

    xh_all = np.stack([rec.xh for rec in tape.steps]).reshape(steps * batch, e + hsz)
    dz_flat = dz_all.reshape(steps * batch, 4 * hsz)
    d_eff["lstm_w"] = matmul(np.ascontiguousarray(xh_all.T), dz_flat)
    d_eff["lstm_b"] = dz_flat.sum(axis=0, keepdims=True)

    dx = _act_backward(model, dx, tape.x_pre)
    demb = np.zeros((v, e), dtype=dflat.dtype)
    np.add.at(demb, tape.tokens.reshape(-1), dx.reshape(-1, e))
    d_eff["embedding"] = demb

    grads = {}
    for name, master in model.params().items():
        if model.quant is None:
            grads[name] = d_eff[name]
        else:
            max_t = w[name][1]
            grads[name] = q.ste_backward(d_eff[name], master, q.WEIGHT, max_t, model.tensor_bits(name))
    return loss, grads


# ---------------------------------------------------------------------------
# training and evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    ppw: float
    mean_nll: float
    tokens: int

    @classmethod
    def from_nll(cls, total_nll, tokens):
        mean = total_nll / tokens
        return cls(math.exp(mean) if mean < 709 else math.inf, mean, tokens)


@dataclass
class Schedule:
    epochs: int = 10
    lr: float = 1.0
    clip: float = 5.0
    batch: int = 20
    seqlen: int = 35
    lr_decay: float = 0.5
    patience: int = 1
    eval_batch: int = 10


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_nll: float
    valid: EvalReport | None


def clip_global_norm(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * grads[name].dtype.type(factor)
    return norm


def sgd_update(model, grads, lr):
    for name, w in model.params().items():
        model.set_param(name, w - w.dtype.type(lr) * grads[name])


def train_epoch(model, stream, schedule, lr):
    dtype = model.embedding.dtype
    h = np.zeros((schedule.batch, model.hidden_size), dtype)
    c = np.zeros_like(h)
    total, count = 0.0, 0
    for inputs, targets in batchify(stream, schedule.batch, schedule.seqlen):
        _, tape, (h, c) = forward_sequence(inputs, model, h, c)
        loss, grads = backward(tape, model, targets)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite training loss {loss}")
        clip_global_norm(grads, schedule.clip)
        if lr != 0:
            sgd_update(model, grads, lr)
        total += loss * targets.size
        count += targets.size
    return total / max(count, 1)


def train(model, corpus, schedule, valid=None, log=None):
    """Truncated-BPTT SGD training; mutates and returns ``model``.

    Returns ``(model, logs)`` with one :class:`EpochLog` per epoch.  The
    learning rate is multiplied by ``lr_decay`` whenever validation PPW has
    not improved for ``patience`` epochs.
    """
    if model.prequantized:
        raise ValueError("cannot train a model restored from quantized storage")
    lr = schedule.lr
    best, stale = math.inf, 0
    logs = []
    for epoch in range(1, schedule.epochs + 1):
        train_nll = train_epoch(model, corpus, schedule, lr)
        report = evaluate_ppw(model, valid, schedule.eval_batch, schedule.seqlen) if valid is not None else None
        if report is not None and not math.isfinite(report.ppw):
            raise DivergenceError(f"validation perplexity overflowed (mean nll {report.mean_nll})")
        entry = EpochLog(epoch, lr, train_nll, report)
        logs.append(entry)
        if log is not None:
            log(entry)
        if report is not None:
            if report.ppw < best:
                best, stale = report.ppw, 0
            else:
                stale += 1
                if stale >= schedule.patience:
                    lr *= schedule.lr_decay
                    stale = 0
    return model, logs


def evaluate_ppw(model, corpus, batch=10, seqlen=35):
    """Perplexity per token over every target the batching produces."""
    stream = np.asarray(corpus, dtype=np.int64)
    if stream.size < 2:
        raise ValueError("cannot evaluate on an empty corpus")
    batch = max(1, min(batch, stream.size // 2))
    seqlen = max(1, min(seqlen, stream.size // batch - 1))
    dtype = model.embedding.dtype
    h = np.zeros((batch, model.hidden_size), dtype)
    c = np.zeros_like(h)
    total, count = 0.0, 0
    for inputs, targets in batchify(stream, batch, seqlen, drop_remainder=False):
        logits, _, (h, c) = forward_sequence(inputs, model, h, c, record=False)
        steps = logits.shape[0]
        logp = log_softmax(logits.reshape(steps * batch, -1).astype(np.float64))
        flat = targets.T.reshape(-1)
        total += -float(logp[np.arange(flat.size), flat].sum())
        count += flat.size
    if count == 0:
        raise ValueError("corpus too short to evaluate")
    return EvalReport.from_nll(total, count)
