"""Bit-width x width grid sweeps with deterministic CSV output."""

import hashlib
import itertools
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .accounting import model_size, runtime_memory
from .arch import lm_spec
from .corpus import build_vocab, read_text
from .lstm import evaluate_ppw, init_model, train

CSV_COLUMNS = ("weight_bits", "activation_bits", "neurons", "ppw", "mean_nll",
               "size_ratio", "memory_ratio", "seed", "status")


def cell_seed(base_seed, weight_bits, activation_bits, neurons):
    """Per-cell 64-bit seed derived from the base seed and the cell key."""
    key = struct.pack("<QIII", base_seed & 0xFFFFFFFFFFFFFFFF, weight_bits, activation_bits, neurons)
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def sweep_threads():
    raw = os.environ.get("LPRNN_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class SweepRow:
    weight_bits: int
    activation_bits: int
    neurons: int
    ppw: float
    mean_nll: float
    size_ratio: float
    memory_ratio: float
    seed: int
    status: str

    def csv(self):
        return ",".join((
            str(self.weight_bits), str(self.activation_bits), str(self.neurons),
            _num(self.ppw), _num(self.mean_nll), _num(self.size_ratio), _num(self.memory_ratio),
            str(self.seed), self.status.replace(",", ";").replace("\n", " "),
        ))


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.6g}"


def grid(weight_bits, activation_bits, neurons):
    return list(itertools.product(weight_bits, activation_bits, neurons))


@dataclass
class Corpora:
    vocab: object
    train: object
    valid: object


def load_corpora(cfg):
    if not cfg.train_path:
        raise FileNotFoundError("config has no [data] train path")
    train_text = read_text(cfg.train_path)
    valid_text = read_text(cfg.valid_path) if cfg.valid_path else None
    vocab_text = train_text if cfg.vocab_mode == "word" else train_text + (valid_text or "")
    vocab = build_vocab(vocab_text, cfg.vocab_mode, cfg.max_vocab)
    train_ids = vocab.encode(train_text)
    valid_ids = vocab.encode(valid_text) if valid_text else train_ids
    return Corpora(vocab, train_ids, valid_ids)


def run_cell(cfg, corpora, weight_bits, activation_bits, neurons):
    seed = cell_seed(cfg.seed, weight_bits, activation_bits, neurons)
    cell = cfg.with_cell(weight_bits, activation_bits, neurons, seed)
    spec = lm_spec(len(corpora.vocab), cell.embed_dim, neurons, weight_bits, activation_bits,
                   cell.quantize_embedding_projection)
    size_ratio = float(model_size(spec).ratio)
    memory_ratio = float(runtime_memory(spec, cell.schedule.eval_batch, cell.schedule.seqlen).ratio)
    row = SweepRow(weight_bits, activation_bits, neurons, math.nan, math.nan, size_ratio, memory_ratio, seed, "ok")
    try:
        model = init_model(len(corpora.vocab), cell.embed_dim, neurons, cell.quant, seed=seed,
                           quantize_embedding_projection=cell.quantize_embedding_projection)
        model, logs = train(model, corpora.train, cell.schedule, valid=corpora.valid)
        if logs:
            report = logs[-1].valid
        else:
            report = evaluate_ppw(model, corpora.valid, cell.schedule.eval_batch, cell.schedule.seqlen)
        row.ppw, row.mean_nll = report.ppw, report.mean_nll
    except ArithmeticError as exc:
        row.status = f"diverged: {exc}"
    except Exception as exc:  # recorded per cell; the sweep goes on
        row.status = f"error: {type(exc).__name__}: {exc}"
    return row


def _cell_task(args):
    cfg, corpora, kw, ka, h = args
    return run_cell(cfg, corpora, kw, ka, h)


def run_sweep(cfg, weight_bits, activation_bits, neurons, threads=None, corpora=None):
    """Train and evaluate every grid cell; rows come back in grid order."""
    if not weight_bits or not activation_bits or not neurons:
        raise ValueError("sweep lists must be non-empty")
    corpora = corpora or load_corpora(cfg)
    cells = grid(weight_bits, activation_bits, neurons)
    threads = sweep_threads() if threads is None else threads
    tasks = [(cfg, corpora, kw, ka, h) for kw, ka, h in cells]
    if threads <= 1 or len(cells) == 1:
        return [_cell_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(cells))) as pool:
        return list(pool.map(_cell_task, tasks))


def format_csv(rows):
    lines = [",".join(CSV_COLUMNS)] + [row.csv() for row in rows]
    return "\n".join(lines) + "\n"
