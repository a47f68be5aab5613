"""Vocabulary construction, encoding and contiguous LM batching."""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

UNK = "<unk>"
EOS = "<eos>"


@dataclass
class Vocab:
    itos: list
    mode: str = "word"
    stoi: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("word", "char"):
            raise ValueError(f"vocab mode must be 'word' or 'char', got {self.mode!r}")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    @property
    def unk_id(self):
        return self.stoi.get(UNK)

    def tokenize(self, text):
        if self.mode == "char":
            return list(text)
        toks = []
        for line in text.splitlines():
            words = line.split()
            if words:
                toks.extend(words)
                toks.append(EOS)
        return toks

    def encode(self, text):
        unk = self.unk_id
        ids = []
        for tok in self.tokenize(text):
            idx = self.stoi.get(tok, unk)
            if idx is None:
                raise KeyError(f"token {tok!r} not in vocabulary and no {UNK} entry")
            ids.append(idx)
        return np.asarray(ids, dtype=np.int64)

    def decode(self, ids):
        toks = [self.itos[i] for i in ids]
        if self.mode == "char":
            return "".join(toks)
        lines, cur = [], []
        for tok in toks:
            if tok == EOS:
                lines.append(" ".join(cur))
                cur = []
            else:
                cur.append(tok)
        if cur:
            lines.append(" ".join(cur))
        return "\n".join(lines) + ("\n" if toks and toks[-1] == EOS else "")


def build_vocab(text, mode="word", max_size=None):
    """Build a vocabulary ranked by frequency, ties broken lexicographically.

    Word mode splits on whitespace, appends ``<eos>`` per non-empty line and
    always reserves ``<unk>`` and ``<eos>``; ``max_size`` counts them.  Char
    mode has one entry per distinct character.
    """
    if not text:
        raise ValueError("cannot build a vocabulary from empty text")
    if mode == "char":
        return Vocab(sorted(set(text)), mode="char")
    counts = Counter()
    for line in text.splitlines():
        words = line.split()
        if words:
            counts.update(words)
            counts[EOS] += 1
    if not counts:
        raise ValueError("text contains no tokens")
    counts.setdefault(UNK, 0)
    ranked = sorted(counts, key=lambda tok: (-counts[tok], tok))
    if max_size is not None:
        if max_size < 2:
            raise ValueError("max_size must leave room for <unk> and <eos>")
        keep = ranked[:max_size]
        if UNK not in keep:
            keep = [tok for tok in keep[:-1]] + [UNK]
        ranked = keep
    return Vocab(ranked, mode="word")


def batchify(stream, batch, seqlen, drop_remainder=True):
    """Yield ``(inputs, targets)`` windows, each ``batch x seqlen``.

    The stream is cut into ``batch`` contiguous lanes of equal length (extra
    tokens at the end are dropped).  Targets are the inputs shifted by one
    within a lane.  A final short window is dropped unless
    ``drop_remainder`` is false.
    """
    stream = np.asarray(stream, dtype=np.int64)
    if batch < 1 or seqlen < 1:
        raise ValueError("batch and seqlen must be positive")
    if stream.size <= batch * seqlen and drop_remainder:
        raise ValueError(f"stream of {stream.size} tokens too short for batch={batch}, seqlen={seqlen}")
    lane_len = stream.size // batch
    if lane_len < 2:
        raise ValueError(f"stream of {stream.size} tokens too short for batch={batch}")
    lanes = stream[:lane_len * batch].reshape(batch, lane_len)
    for start in range(0, lane_len - 1, seqlen):
        stop = min(start + seqlen, lane_len - 1)
        if stop - start < seqlen and drop_remainder:
            break
        yield lanes[:, start:stop], lanes[:, start + 1:stop + 1]


def read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()
