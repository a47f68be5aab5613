import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lprnn.corpus import EOS, UNK, batchify, build_vocab


def test_word_vocab_ordering():
    vocab = build_vocab("a b a", "word")
    # a (2), then ties at count 1 sorted lexicographically: "<eos>" < "b"; <unk> (0) last
    assert vocab.itos == ["a", EOS, "b", UNK]
    assert len(vocab) == 4


def test_max_size_caps_vocab():
    words = [f"w{i}" for i in range(12000)]
    text = "\n".join(" ".join(words[i:i + 20]) for i in range(0, len(words), 20)) + "\nw1 w2 <unk>\n"
    vocab = build_vocab(text, "word", max_size=10000)
    assert len(vocab) == 10000
    assert UNK in vocab.stoi and EOS in vocab.stoi
    assert vocab.encode("never-seen-word\n")[0] == vocab.unk_id


def test_char_vocab():
    assert len(build_vocab("ab", "char")) == 2


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        build_vocab("", "word")


def test_round_trip_with_unk():
    vocab = build_vocab("the cat sat\nthe dog\n", "word", max_size=4)
    ids = vocab.encode("the cat sat\nthe dog\n")
    decoded = vocab.decode(ids)
    assert decoded.split() == [w if w in vocab.stoi else UNK for w in "the cat sat the dog".split()]
    char_vocab = build_vocab("hello world", "char")
    assert char_vocab.decode(char_vocab.encode("hello world")) == "hello world"


def test_batchify_ten_tokens():
    windows = list(batchify(np.arange(10), 2, 2))
    assert len(windows) == 2
    (x0, y0), (x1, y1) = windows
    assert x0.tolist() == [[0, 1], [5, 6]] and y0.tolist() == [[1, 2], [6, 7]]
    assert x1.tolist() == [[2, 3], [7, 8]] and y1.tolist() == [[3, 4], [8, 9]]


def test_batchify_single_window():
    (x, y), = list(batchify(np.arange(9), 1, 8))
    assert x.tolist() == [list(range(8))] and y.tolist() == [list(range(1, 9))]


def test_batchify_too_short():
    with pytest.raises(ValueError):
        list(batchify(np.arange(4), 2, 2))


def test_batchify_deterministic():
    a = [tuple(map(np.ndarray.tolist, w)) for w in batchify(np.arange(50) % 7, 3, 4)]
    b = [tuple(map(np.ndarray.tolist, w)) for w in batchify(np.arange(50) % 7, 3, 4)]
    assert a == b


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 300), st.integers(1, 5), st.integers(1, 9))
def test_targets_are_next_tokens(n, batch, seqlen):
    stream = np.random.default_rng(n).integers(0, 50, n)
    if n <= batch * seqlen:
        return
    lane_len = n // batch
    lanes = stream[:lane_len * batch].reshape(batch, lane_len)
    pos = 0
    for x, y in batchify(stream, batch, seqlen):
        assert x.shape == (batch, seqlen)
        assert np.array_equal(x, lanes[:, pos:pos + seqlen])
        assert np.array_equal(y, lanes[:, pos + 1:pos + seqlen + 1])
        pos += seqlen
