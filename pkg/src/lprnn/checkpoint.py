"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic      6 bytes  b"LPRNN1"
    version    u16
    hdr_len    u32      followed by hdr_len bytes of UTF-8 JSON (sorted keys)
    hdr_crc    u32      CRC32 of the JSON bytes
    n_tensors  u32
    n_tensors records:
        name_len u16, name (UTF-8)
        storage  u8     0 = raw float32, 1 = packed codes
        bits     u8
        rows     u32
        cols     u32
        scale    f64
        offset   f64
        nbytes   u64, payload
        crc      u32    CRC32 of the payload

Quantized tensors are written as the effective (on-grid) weights, packed at
their bit-width; a model loaded from such a checkpoint is marked
``prequantized`` and evaluates bit-identically to the model that was saved.
"""

import json
import struct
import zlib

import numpy as np

from .corpus import Vocab
from .lstm import PARAM_NAMES, LmModel, LstmParams, effective_weights
from .packing import PackedTensor, pack, unpack
from .quant import IDENTITY_BITS, QuantSpec, levels

MAGIC = b"LPRNN1"
VERSION = 1
RAW, PACKED = 0, 1

_RECORD = struct.Struct("<BBIIddQ")


class CorruptCheckpointError(ValueError):
    pass


def _header(model, vocab):
    quant = None if model.quant is None else [model.quant.weight_bits, model.quant.activation_bits]
    return {
        "format": "lprnn-lm",
        "vocab_size": model.vocab_size,
        "embed_dim": model.embed_dim,
        "hidden_size": model.hidden_size,
        "quant": quant,
        "quantize_embedding_projection": model.quantize_embedding_projection,
        "vocab": None if vocab is None else {"mode": vocab.mode, "itos": list(vocab.itos)},
    }


def packed_tensors(model):
    """Name -> PackedTensor for every parameter, in checkpoint order."""
    weights = effective_weights(model)
    out = {}
    for name in PARAM_NAMES:
        bits = model.tensor_bits(name)
        tensor = weights[name][0]
        if bits != IDENTITY_BITS and not tensor.any():
            # an all-zero tensor has no odd-grid encoding; code 0 on the unit grid is exact zero
            out[name] = pack(tensor, bits, scale=1.0 / levels(bits), offset=0.0)
        else:
            out[name] = pack(tensor, bits)
    return out


def dumps(model, vocab=None):
    header = json.dumps(_header(model, vocab), sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(header)), header,
             struct.pack("<I", zlib.crc32(header))]
    tensors = packed_tensors(model)
    parts.append(struct.pack("<I", len(tensors)))
    for name, p in tensors.items():
        encoded = name.encode("utf-8")
        payload = np.ascontiguousarray(p.payload).tobytes()
        storage = RAW if p.bits == IDENTITY_BITS else PACKED
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(_RECORD.pack(storage, p.bits, p.rows, p.cols, p.scale, p.offset, len(payload)))
        parts.append(payload)
        parts.append(struct.pack("<I", zlib.crc32(payload)))
    return b"".join(parts)


def save_checkpoint(model, path, vocab=None):
    data = dumps(model, vocab)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


class _Cursor:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise CorruptCheckpointError(f"truncated checkpoint while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(chunk)

    def unpack(self, fmt, what):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size, what))


def loads(data):
    """Parse checkpoint bytes into ``(model, vocab, tensors)``."""
    cur = _Cursor(data)
    if cur.take(len(MAGIC), "magic") != MAGIC:
        raise CorruptCheckpointError("bad magic; not an LPRNN checkpoint")
    version, hdr_len = cur.unpack("<HI", "version")
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported checkpoint version {version}")
    raw_header = cur.take(hdr_len, "header")
    (hdr_crc,) = cur.unpack("<I", "header checksum")
    if zlib.crc32(raw_header) != hdr_crc:
        raise CorruptCheckpointError("header checksum mismatch")
    try:
        header = json.loads(raw_header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"unreadable header: {exc}") from exc
    (count,) = cur.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        (name_len,) = cur.unpack("<H", "tensor name length")
        name = cur.take(name_len, "tensor name").decode("utf-8", errors="replace")
        storage, bits, rows, cols, scale, offset, nbytes = cur.unpack(_RECORD.format, f"record {name}")
        payload = cur.take(nbytes, f"payload of {name}")
        (crc,) = cur.unpack("<I", f"checksum of {name}")
        if zlib.crc32(payload) != crc:
            raise CorruptCheckpointError(f"payload checksum mismatch for tensor {name!r}")
        per_row = cols * 4 if storage == RAW else (cols * bits + 7) // 8
        if storage not in (RAW, PACKED) or nbytes != rows * per_row:
            raise CorruptCheckpointError(f"tensor {name!r}: payload length {nbytes} does not match its shape")
        buf = np.frombuffer(payload, dtype=np.uint8).reshape(rows, per_row)
        p = PackedTensor(bits, rows, cols, buf, scale, offset)
        if storage == PACKED and cols and int(p.codes().max(initial=0)) > levels(bits):
            raise CorruptCheckpointError(f"tensor {name!r} holds a code >= 2^{bits}")
        tensors[name] = p
    if cur.pos != len(cur.data):
        raise CorruptCheckpointError("trailing bytes after last tensor")
    missing = [n for n in PARAM_NAMES if n not in tensors]
    if missing:
        raise CorruptCheckpointError(f"checkpoint lacks tensors {missing}")

    arrays = {name: unpack(tensors[name]) for name in PARAM_NAMES}
    e, h = header["embed_dim"], header["hidden_size"]
    quant = None if header["quant"] is None else QuantSpec(*header["quant"])
    model = LmModel(
        arrays["embedding"],
        LstmParams(arrays["lstm_w"], arrays["lstm_b"], e, h),
        arrays["projection"],
        arrays["projection_bias"],
        quant,
        header["quantize_embedding_projection"],
        prequantized=quant is not None and quant.weight_bits != IDENTITY_BITS,
    )
    vocab = None
    if header.get("vocab"):
        vocab = Vocab(header["vocab"]["itos"], mode=header["vocab"]["mode"])
    return model, vocab, tensors


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def payload_bytes(tensors):
    return sum(p.nbytes for p in tensors.values())
